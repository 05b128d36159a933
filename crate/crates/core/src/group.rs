//! Finite abelian groups `Z_{m_1} x ... x Z_{m_r}`, subsets and complex-valued
//! functions on them.
//!
//! Elements are addressed by a flat index in lexicographic (row-major) order
//! over coordinate tuples: the first coordinate is the most significant digit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FiniteAbelianGroup {
    moduli: Vec<usize>,
    strides: Vec<usize>,
    order: usize,
}

impl FiniteAbelianGroup {
    pub fn new(moduli: Vec<usize>) -> Result<Self> {
        if moduli.contains(&0) {
            return Err(Error::InvalidGroup(format!("zero modulus in {moduli:?}")));
        }
        let mut order: usize = 1;
        for &m in &moduli {
            order = order
                .checked_mul(m)
                .ok_or_else(|| Error::InvalidGroup(format!("order of {moduli:?} overflows")))?;
        }
        let mut strides = vec![1; moduli.len()];
        for j in (0..moduli.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * moduli[j + 1];
        }
        Ok(Self {
            moduli,
            strides,
            order,
        })
    }

    pub fn cyclic(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    /// `(Z_m)^d`.
    pub fn power(m: usize, d: usize) -> Result<Self> {
        Self::new(vec![m; d])
    }

    pub fn moduli(&self) -> &[usize] {
        &self.moduli
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn rank(&self) -> usize {
        self.moduli.len()
    }

    /// True when every modulus is 2, i.e. the group is elementary abelian of
    /// exponent 2 and addition is XOR on indices.
    pub fn is_binary(&self) -> bool {
        !self.moduli.is_empty() && self.moduli.iter().all(|&m| m == 2)
    }

    pub fn index_of(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.rank() {
            return Err(Error::Malformed(format!(
                "coordinate tuple of length {} in group of rank {}",
                coords.len(),
                self.rank()
            )));
        }
        let mut idx = 0;
        for (j, (&c, &m)) in coords.iter().zip(&self.moduli).enumerate() {
            if c >= m {
                return Err(Error::Malformed(format!(
                    "coordinate {c} out of range for Z_{m} at axis {j}"
                )));
            }
            idx += c * self.strides[j];
        }
        Ok(idx)
    }

    pub fn coords_of(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.rank()];
        for j in 0..self.rank() {
            out[j] = idx / self.strides[j];
            idx %= self.strides[j];
        }
        out
    }

    #[inline]
    pub fn add(&self, a: usize, b: usize) -> usize {
        if self.is_binary() {
            return a ^ b;
        }
        if self.rank() == 1 {
            let s = a + b;
            return if s >= self.order { s - self.order } else { s };
        }
        let mut out = 0;
        let (mut a, mut b) = (a, b);
        for j in 0..self.rank() {
            let (da, db) = (a / self.strides[j], b / self.strides[j]);
            a %= self.strides[j];
            b %= self.strides[j];
            let s = da + db;
            let s = if s >= self.moduli[j] { s - self.moduli[j] } else { s };
            out += s * self.strides[j];
        }
        out
    }

    #[inline]
    pub fn neg(&self, a: usize) -> usize {
        if self.is_binary() {
            return a;
        }
        let mut out = 0;
        let mut a = a;
        for j in 0..self.rank() {
            let da = a / self.strides[j];
            a %= self.strides[j];
            let n = if da == 0 { 0 } else { self.moduli[j] - da };
            out += n * self.strides[j];
        }
        out
    }

    #[inline]
    pub fn sub(&self, a: usize, b: usize) -> usize {
        self.add(a, self.neg(b))
    }

    /// The pairing `x . xi = sum_j x_j xi_j / m_j` reduced to `[0, 1)`.
    pub fn pairing(&self, x: usize, xi: usize) -> f64 {
        let (cx, cxi) = (self.coords_of(x), self.coords_of(xi));
        let mut acc = 0.0;
        for j in 0..self.rank() {
            let m = self.moduli[j];
            acc += ((cx[j] * cxi[j]) % m) as f64 / m as f64;
        }
        acc.fract()
    }
}

/// A complex-valued function on a finite abelian group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupFunction {
    group: FiniteAbelianGroup,
    values: Vec<Complex64>,
}

impl GroupFunction {
    pub fn new(group: FiniteAbelianGroup, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != group.order() {
            return Err(Error::Malformed(format!(
                "{} values for a group of order {}",
                values.len(),
                group.order()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Malformed("non-finite function value".into()));
        }
        Ok(Self { group, values })
    }

    pub fn from_real(group: FiniteAbelianGroup, values: &[f64]) -> Result<Self> {
        Self::new(group, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(group: FiniteAbelianGroup) -> Self {
        let n = group.order();
        Self {
            group,
            values: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn indicator(set: &GroupSubset) -> Self {
        let values = set
            .membership()
            .iter()
            .map(|&b| Complex64::new(if b { 1.0 } else { 0.0 }, 0.0))
            .collect();
        Self {
            group: set.group().clone(),
            values,
        }
    }

    pub fn group(&self) -> &FiniteAbelianGroup {
        &self.group
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Unnormalized `l2` norm: `(sum_x |f(x)|^2)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// A subset of a finite abelian group stored as a membership mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupSubset {
    group: FiniteAbelianGroup,
    membership: Vec<bool>,
    size: usize,
}

impl GroupSubset {
    pub fn empty(group: FiniteAbelianGroup) -> Self {
        let n = group.order();
        Self {
            group,
            membership: vec![false; n],
            size: 0,
        }
    }

    pub fn full(group: FiniteAbelianGroup) -> Self {
        let n = group.order();
        Self {
            group,
            membership: vec![true; n],
            size: n,
        }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(
        group: FiniteAbelianGroup,
        indices: I,
    ) -> Result<Self> {
        let mut s = Self::empty(group);
        for i in indices {
            if i >= s.group.order() {
                return Err(Error::Malformed(format!(
                    "index {i} outside group of order {}",
                    s.group.order()
                )));
            }
            s.insert(i);
        }
        Ok(s)
    }

    pub fn from_mask(group: FiniteAbelianGroup, membership: Vec<bool>) -> Result<Self> {
        if membership.len() != group.order() {
            return Err(Error::Malformed("mask length differs from group order".into()));
        }
        let size = membership.iter().filter(|&&b| b).count();
        Ok(Self {
            group,
            membership,
            size,
        })
    }

    pub fn from_coords(group: FiniteAbelianGroup, coords: &[Vec<usize>]) -> Result<Self> {
        let idx = coords
            .iter()
            .map(|c| group.index_of(c))
            .collect::<Result<Vec<_>>>()?;
        Self::from_indices(group, idx)
    }

    pub fn insert(&mut self, idx: usize) -> bool {
        if self.membership[idx] {
            false
        } else {
            self.membership[idx] = true;
            self.size += 1;
            true
        }
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.membership[idx]
    }

    pub fn group(&self) -> &FiniteAbelianGroup {
        &self.group
    }

    pub fn membership(&self) -> &[bool] {
        &self.membership
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn is_full(&self) -> bool {
        self.size == self.group.order()
    }

    /// Member indices in increasing (lexicographic) order.
    pub fn indices(&self) -> Vec<usize> {
        self.membership
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn translate(&self, t: usize) -> Self {
        let mut out = Self::empty(self.group.clone());
        for i in self.indices() {
            out.insert(self.group.add(i, t));
        }
        out
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.membership
            .iter()
            .zip(&other.membership)
            .all(|(&a, &b)| !a || b)
    }

    pub fn to_record(&self) -> SubsetRecord {
        SubsetRecord {
            moduli: self.group.moduli().to_vec(),
            members: self
                .indices()
                .into_iter()
                .map(|i| self.group.coords_of(i))
                .collect(),
        }
    }

    pub fn from_record(rec: &SubsetRecord) -> Result<Self> {
        let g = FiniteAbelianGroup::new(rec.moduli.clone())?;
        Self::from_coords(g, &rec.members)
    }
}

/// JSON shape of a [`GroupSubset`]: members are coordinate tuples in
/// lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetRecord {
    pub moduli: Vec<usize>,
    pub members: Vec<Vec<usize>>,
}

impl Serialize for GroupSubset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for GroupSubset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = SubsetRecord::deserialize(d)?;
        GroupSubset::from_record(&rec).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_indexing() {
        let g = FiniteAbelianGroup::new(vec![2, 3]).unwrap();
        assert_eq!(g.order(), 6);
        assert_eq!(g.index_of(&[1, 2]).unwrap(), 5);
        assert_eq!(g.coords_of(4), vec![1, 1]);
        assert!(g.index_of(&[2, 0]).is_err());
    }

    #[test]
    fn arithmetic_matches_coordinates() {
        let g = FiniteAbelianGroup::new(vec![3, 4, 2]).unwrap();
        for a in 0..g.order() {
            for b in 0..g.order() {
                let (ca, cb) = (g.coords_of(a), g.coords_of(b));
                let want: Vec<usize> = (0..3).map(|j| (ca[j] + cb[j]) % g.moduli()[j]).collect();
                assert_eq!(g.coords_of(g.add(a, b)), want);
                assert_eq!(g.add(g.sub(a, b), b), a);
            }
        }
    }

    #[test]
    fn zero_modulus_rejected() {
        assert!(FiniteAbelianGroup::new(vec![3, 0]).is_err());
    }

    #[test]
    fn json_sorted_members() {
        let g = FiniteAbelianGroup::new(vec![2, 2]).unwrap();
        let s = GroupSubset::from_indices(g, [3, 0]).unwrap();
        let js = serde_json::to_string(&s).unwrap();
        assert_eq!(js, r#"{"moduli":[2,2],"members":[[0,0],[1,1]]}"#);
        let back: GroupSubset = serde_json::from_str(&js).unwrap();
        assert_eq!(back, s);
    }
}
