//! Linear bias, sumsets and the bias-to-sumset bound.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{convolve, dft, walsh_spectrum, wht_i64};
use crate::group::{FiniteAbelianGroup, GroupFunction, GroupSubset};

/// Largest binary group for which sumsets go through the integer transform.
const WHT_SUMSET_MAX_ORDER: usize = 1 << 22;

/// Absolute error bound quoted for the floating transform path.
pub const FLOAT_BIAS_ERROR: f64 = 1e-11;

/// `max_{xi != 0} |1_B^(xi)|`, exact as `walsh_max / order` on binary groups.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearBias {
    pub value: f64,
    pub order: u64,
    pub walsh_max: Option<u64>,
    pub error_bound: f64,
}

impl LinearBias {
    pub fn is_exact(&self) -> bool {
        self.walsh_max.is_some()
    }

    /// Strict test `bias < q^{-1/2}`. Integer comparison `W^2 q < |G|^2` on the
    /// exact path; on the floating path the error bound is charged against us.
    pub fn below_inverse_sqrt(&self, q: u64) -> bool {
        match self.walsh_max {
            Some(w) => (w as u128) * (w as u128) * (q as u128) < (self.order as u128).pow(2),
            None => self.value + self.error_bound < 1.0 / (q as f64).sqrt(),
        }
    }
}

pub fn linear_bias(b: &GroupSubset) -> Result<LinearBias> {
    let g = b.group();
    if g.order() < 2 {
        return Err(Error::Domain("group of order 1 has no nonzero frequency".into()));
    }
    if g.is_binary() {
        let spec = walsh_spectrum(b.membership());
        let w = spec[1..].iter().map(|v| v.unsigned_abs()).max().unwrap_or(0);
        return Ok(LinearBias {
            value: w as f64 / g.order() as f64,
            order: g.order() as u64,
            walsh_max: Some(w),
            error_bound: 0.0,
        });
    }
    let fh = dft(&GroupFunction::indicator(b))?;
    let value = fh.values()[1..]
        .iter()
        .map(|c| c.norm())
        .fold(0.0f64, f64::max);
    Ok(LinearBias {
        value,
        order: g.order() as u64,
        walsh_max: None,
        error_bound: FLOAT_BIAS_ERROR,
    })
}

fn check_same(a: &GroupSubset, b: &GroupSubset) -> Result<()> {
    if a.group() != b.group() {
        return Err(Error::GroupMismatch {
            left: a.group().moduli().to_vec(),
            right: b.group().moduli().to_vec(),
        });
    }
    Ok(())
}

/// `A+B` by enumerating translates `a+B`, stopping once the group is covered.
pub fn sumset_direct(a: &GroupSubset, b: &GroupSubset) -> Result<GroupSubset> {
    check_same(a, b)?;
    let g = a.group();
    if g.rank() == 1 && g.order() >= 64 {
        return Ok(sumset_cyclic_bits(a, b));
    }
    let bs = b.indices();
    let mut out = GroupSubset::empty(g.clone());
    for x in a.indices() {
        for &y in &bs {
            out.insert(g.add(x, y));
        }
        if out.is_full() {
            break;
        }
    }
    Ok(out)
}

fn sumset_cyclic_bits(a: &GroupSubset, b: &GroupSubset) -> GroupSubset {
    let n = a.group().order();
    let words = n.div_ceil(64);
    // doubled copy so that a rotation is a plain shifted read
    let mut doubled = vec![0u64; 2 * words + 1];
    for i in b.indices() {
        for pos in [i, i + n] {
            doubled[pos / 64] |= 1 << (pos % 64);
        }
    }
    let mut acc = vec![0u64; words];
    let tail_mask = if n.is_multiple_of(64) { u64::MAX } else { (1u64 << (n % 64)) - 1 };
    for t in a.indices() {
        // bit x of the rotation is bit (x - t mod n) of B, i.e. bit (x + n - t) of doubled
        let shift = n - t;
        let (wq, wr) = (shift / 64, shift % 64);
        let mut full = true;
        for w in 0..words {
            let lo = doubled[w + wq] >> wr;
            let hi = if wr == 0 { 0 } else { doubled[w + wq + 1] << (64 - wr) };
            acc[w] |= lo | hi;
            let mask = if w + 1 == words { tail_mask } else { u64::MAX };
            full &= acc[w] & mask == mask;
        }
        if full {
            break;
        }
    }
    let mask = (0..n).map(|x| acc[x / 64] >> (x % 64) & 1 == 1).collect();
    GroupSubset::from_mask(a.group().clone(), mask).expect("mask length is the order")
}

/// Exact representation counts `r(x) = #{(a,b): a+b=x}` on a binary group via
/// the integer Walsh-Hadamard transform.
pub fn representation_counts_binary(a: &GroupSubset, b: &GroupSubset) -> Result<Vec<i64>> {
    check_same(a, b)?;
    let g = a.group();
    if !g.is_binary() {
        return Err(Error::Domain("integer transform path needs all moduli 2".into()));
    }
    let mut fa: Vec<i64> = a.membership().iter().map(|&x| x as i64).collect();
    let mut fb: Vec<i64> = b.membership().iter().map(|&x| x as i64).collect();
    wht_i64(&mut fa);
    wht_i64(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    wht_i64(&mut fa);
    let n = g.order() as i64;
    for v in &mut fa {
        debug_assert_eq!(*v % n, 0);
        *v /= n;
    }
    Ok(fa)
}

/// Support of `1_A * 1_B`, treating magnitudes below `|G|^{-1} 10^{-6}` as zero.
pub fn sumset_by_convolution(a: &GroupSubset, b: &GroupSubset) -> Result<GroupSubset> {
    check_same(a, b)?;
    let g = a.group();
    let conv = convolve(&GroupFunction::indicator(a), &GroupFunction::indicator(b))?;
    let cut = 1e-6 / g.order() as f64;
    let mask = conv.values().iter().map(|c: &Complex64| c.norm() >= cut).collect();
    GroupSubset::from_mask(g.clone(), mask)
}

/// Exact `A+B`: integer transform on binary groups, enumeration otherwise.
pub fn sumset(a: &GroupSubset, b: &GroupSubset) -> Result<GroupSubset> {
    check_same(a, b)?;
    let g = a.group();
    if g.is_binary() && g.order() <= WHT_SUMSET_MAX_ORDER {
        let r = representation_counts_binary(a, b)?;
        return GroupSubset::from_mask(g.clone(), r.iter().map(|&c| c > 0).collect());
    }
    sumset_direct(a, b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumsetCoverReport {
    pub order: usize,
    pub a_size: usize,
    pub b_size: usize,
    pub sumset_size: usize,
    /// `|G| / |A+B|`
    pub ratio: f64,
    /// `1 + ||B||_u^2 |G|^3 / (|A| |B|^2)`
    pub bound: f64,
    pub bias: LinearBias,
    pub holds: bool,
}

/// Relative slack allowed when the bias is only known in floating point.
const FLOAT_BOUND_SLACK: f64 = 1e-9;

pub fn sumset_cover_report(a: &GroupSubset, b: &GroupSubset) -> Result<SumsetCoverReport> {
    check_same(a, b)?;
    if a.is_empty() {
        return Err(Error::EmptySet("A"));
    }
    if b.is_empty() {
        return Err(Error::EmptySet("B"));
    }
    let g: &FiniteAbelianGroup = a.group();
    let s = sumset(a, b)?;
    if !g.is_binary() && g.order() <= 1 << 16 {
        let via_conv = sumset_by_convolution(a, b)?;
        if via_conv != s {
            return Err(Error::Invariant {
                invariant: "convolution support equals enumerated sumset".into(),
                step: 0,
                detail: format!("{} vs {} elements", via_conv.len(), s.len()),
            });
        }
    }
    let n = g.order() as u128;
    let (na, nb, ns) = (a.len() as u128, b.len() as u128, s.len() as u128);
    let bias = if g.order() == 1 {
        LinearBias {
            value: 0.0,
            order: 1,
            walsh_max: Some(0),
            error_bound: 0.0,
        }
    } else {
        linear_bias(b)?
    };
    let bound = 1.0 + bias.value * bias.value * (n as f64).powi(3) / (na as f64 * (nb * nb) as f64);
    let ratio = n as f64 / ns as f64;
    let holds = match bias.walsh_max {
        // n |A||B|^2 <= |A+B| (|A||B|^2 + W^2 n)
        Some(w) => {
            let w = w as u128;
            n * na * nb * nb <= ns * (na * nb * nb + w * w * n)
        }
        None => ratio <= bound * (1.0 + FLOAT_BOUND_SLACK),
    };
    Ok(SumsetCoverReport {
        order: g.order(),
        a_size: a.len(),
        b_size: b.len(),
        sumset_size: s.len(),
        ratio,
        bound,
        bias,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn set(moduli: Vec<usize>, idx: &[usize]) -> GroupSubset {
        GroupSubset::from_indices(FiniteAbelianGroup::new(moduli).unwrap(), idx.iter().copied()).unwrap()
    }

    fn bias_oracle(b: &GroupSubset) -> f64 {
        let g = b.group();
        let n = g.order();
        (1..n)
            .map(|xi| {
                let mut acc = Complex64::new(0.0, 0.0);
                for x in b.indices() {
                    acc += Complex64::from_polar(1.0, -2.0 * PI * g.pairing(x, xi));
                }
                acc.norm() / n as f64
            })
            .fold(0.0, f64::max)
    }

    fn sumset_oracle(a: &GroupSubset, b: &GroupSubset) -> Vec<usize> {
        let g = a.group();
        let mut v: Vec<usize> = a
            .indices()
            .iter()
            .flat_map(|&x| b.indices().into_iter().map(move |y| g.add(x, y)))
            .collect();
        v.sort();
        v.dedup();
        v
    }

    #[test]
    fn whole_group_has_zero_bias() {
        for moduli in [vec![5], vec![2, 2, 2], vec![3, 4]] {
            let g = FiniteAbelianGroup::new(moduli).unwrap();
            let b = linear_bias(&GroupSubset::full(g)).unwrap();
            assert!(b.value < 1e-12);
        }
    }

    #[test]
    fn singleton_bias_is_inverse_order() {
        let b = linear_bias(&set(vec![7], &[0])).unwrap();
        assert!((b.value - 1.0 / 7.0).abs() < 1e-12);
        let b = linear_bias(&set(vec![2, 2, 2], &[0])).unwrap();
        assert_eq!(b.walsh_max, Some(1));
        assert_eq!(b.value, 1.0 / 8.0);
    }

    #[test]
    fn trivial_group_has_no_bias() {
        let g = FiniteAbelianGroup::cyclic(1).unwrap();
        assert!(matches!(linear_bias(&GroupSubset::full(g)), Err(Error::Domain(_))));
    }

    #[test]
    fn float_bias_matches_oracle() {
        let b = set(vec![3, 3], &[1, 3, 4, 8]);
        let got = linear_bias(&b).unwrap();
        assert!((got.value - bias_oracle(&b)).abs() < 1e-12);
        let b = set(vec![12], &[0, 1, 5, 7]);
        assert!((linear_bias(&b).unwrap().value - bias_oracle(&b)).abs() < 1e-12);
    }

    #[test]
    fn binary_bias_matches_oracle() {
        let b = set(vec![2, 2, 2, 2], &[1, 2, 4, 9, 15]);
        let got = linear_bias(&b).unwrap();
        assert!((got.value - bias_oracle(&b)).abs() < 1e-12);
    }

    #[test]
    fn z8_pair_sumset() {
        let a = set(vec![8], &[0, 1]);
        let r = sumset_cover_report(&a, &a).unwrap();
        assert_eq!(sumset(&a, &a).unwrap().indices(), vec![0, 1, 2]);
        assert!((r.ratio - 8.0 / 3.0).abs() < 1e-15);
        assert!(r.bound >= 8.0 / 3.0);
        assert!(r.holds);
    }

    #[test]
    fn singleton_plus_group() {
        let g = FiniteAbelianGroup::cyclic(9).unwrap();
        let a = GroupSubset::from_indices(g.clone(), [0]).unwrap();
        let r = sumset_cover_report(&a, &GroupSubset::full(g)).unwrap();
        assert_eq!(r.sumset_size, 9);
        assert_eq!(r.ratio, 1.0);
        assert!((r.bound - 1.0).abs() < 1e-9);
        assert!(r.holds);
    }

    #[test]
    fn empty_inputs_rejected() {
        let g = FiniteAbelianGroup::cyclic(4).unwrap();
        let e = GroupSubset::empty(g.clone());
        let f = GroupSubset::full(g);
        assert_eq!(sumset_cover_report(&e, &f), Err(Error::EmptySet("A")));
        assert_eq!(sumset_cover_report(&f, &e), Err(Error::EmptySet("B")));
    }

    #[test]
    fn routes_agree_with_oracle() {
        let cases = [
            (vec![70], vec![0, 3, 9, 64], vec![1, 2, 50]),
            (vec![3, 5], vec![0, 7], vec![2, 4, 11]),
            (vec![2, 2, 2, 2], vec![3, 5], vec![0, 6, 9]),
        ];
        for (moduli, ai, bi) in cases {
            let a = set(moduli.clone(), &ai);
            let b = set(moduli, &bi);
            let want = sumset_oracle(&a, &b);
            assert_eq!(sumset(&a, &b).unwrap().indices(), want);
            assert_eq!(sumset_direct(&a, &b).unwrap().indices(), want);
            assert_eq!(sumset_by_convolution(&a, &b).unwrap().indices(), want);
        }
    }
}
