//! Dyadic-lattice geometry: point sets, elementary sets (finite unions of
//! closed boxes) and exact coverage checks.
//!
//! A coordinate `x` at exponent `w` stands for the real number `x * 2^{-w}`.
//! Volumes are integers in units of `2^{-w d}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest raster (in cells) built for coverage checks in dimension >= 2.
pub const RASTER_BUDGET: u128 = 1 << 27;

fn rescale_coord(x: i64, from: u32, to: u32) -> i64 {
    debug_assert!(to >= from);
    x << (to - from)
}

/// Finite point set on the lattice `2^{-exponent} Z^d`, stored flat, sorted and
/// deduplicated.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PointSetRecord", into = "PointSetRecord")]
pub struct PointSet {
    d: usize,
    exponent: u32,
    coords: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
struct PointSetRecord {
    d: usize,
    exponent: u32,
    points: Vec<Vec<i64>>,
}

impl TryFrom<PointSetRecord> for PointSet {
    type Error = Error;
    fn try_from(r: PointSetRecord) -> Result<Self> {
        PointSet::new(r.d, r.exponent, r.points)
    }
}

impl From<PointSet> for PointSetRecord {
    fn from(p: PointSet) -> Self {
        PointSetRecord {
            d: p.d,
            exponent: p.exponent,
            points: p.iter().map(|x| x.to_vec()).collect(),
        }
    }
}

impl PointSet {
    pub fn new(d: usize, exponent: u32, points: Vec<Vec<i64>>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Malformed("dimension must be positive".into()));
        }
        let mut flat = Vec::with_capacity(points.len() * d);
        for p in &points {
            if p.len() != d {
                return Err(Error::Malformed(format!("point {p:?} is not in dimension {d}")));
            }
            flat.extend_from_slice(p);
        }
        Ok(Self::from_flat(d, exponent, flat))
    }

    pub fn from_flat(d: usize, exponent: u32, flat: Vec<i64>) -> Self {
        let mut pts: Vec<&[i64]> = flat.chunks(d).collect();
        pts.sort();
        pts.dedup();
        let coords = pts.concat();
        Self { d, exponent, coords }
    }

    pub fn empty(d: usize, exponent: u32) -> Self {
        Self {
            d,
            exponent,
            coords: Vec::new(),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[i64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[i64]> + '_ {
        self.coords.chunks(self.d)
    }

    pub fn flat(&self) -> &[i64] {
        &self.coords
    }

    pub fn contains(&self, p: &[i64]) -> bool {
        let n = self.len();
        let (mut lo, mut hi) = (0, n);
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.point(mid).cmp(p) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    pub fn rescaled(&self, exponent: u32) -> Result<Self> {
        if exponent < self.exponent {
            return Err(Error::Domain(format!(
                "cannot coarsen points from exponent {} to {exponent}",
                self.exponent
            )));
        }
        Ok(Self {
            d: self.d,
            exponent,
            coords: self.coords.iter().map(|&x| rescale_coord(x, self.exponent, exponent)).collect(),
        })
    }

    pub fn translated(&self, v: &[i64]) -> Self {
        let coords = self
            .coords
            .chunks(self.d)
            .flat_map(|p| p.iter().zip(v).map(|(a, b)| a + b))
            .collect();
        Self {
            d: self.d,
            exponent: self.exponent,
            coords,
        }
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        let w = self.exponent.max(other.exponent);
        let (a, b) = (self.rescaled(w)?, other.rescaled(w)?);
        let mut flat = a.coords;
        flat.extend_from_slice(&b.coords);
        Ok(Self::from_flat(self.d, w, flat))
    }

    pub fn filter<F: Fn(&[i64]) -> bool>(&self, keep: F) -> Self {
        let coords = self.iter().filter(|p| keep(p)).flatten().copied().collect();
        Self {
            d: self.d,
            exponent: self.exponent,
            coords,
        }
    }

    /// Points as real vectors (for reporting only).
    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        let s = (-(self.exponent as f64)).exp2();
        self.iter().map(|p| p.iter().map(|&x| x as f64 * s).collect()).collect()
    }
}

/// Closed box `[lo, hi]` on the lattice, `lo < hi` coordinatewise.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl LatticeBox {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(Error::Malformed(format!("degenerate box {lo:?}..{hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(lo: Vec<i64>, side: i64) -> Self {
        let hi = lo.iter().map(|x| x + side).collect();
        Self { lo, hi }
    }

    pub fn d(&self) -> usize {
        self.lo.len()
    }

    pub fn volume_units(&self) -> u128 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a) as u128).product()
    }

    pub fn contains_box(&self, other: &Self) -> bool {
        (0..self.d()).all(|i| self.lo[i] <= other.lo[i] && other.hi[i] <= self.hi[i])
    }

    pub fn contains_point(&self, p: &[i64]) -> bool {
        (0..self.d()).all(|i| self.lo[i] <= p[i] && p[i] <= self.hi[i])
    }

    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let lo: Vec<i64> = (0..self.d()).map(|i| self.lo[i].max(other.lo[i])).collect();
        let hi: Vec<i64> = (0..self.d()).map(|i| self.hi[i].min(other.hi[i])).collect();
        lo.iter().zip(&hi).all(|(a, b)| a < b).then_some(Self { lo, hi })
    }

    pub fn translated(&self, v: &[i64]) -> Self {
        Self {
            lo: self.lo.iter().zip(v).map(|(a, b)| a + b).collect(),
            hi: self.hi.iter().zip(v).map(|(a, b)| a + b).collect(),
        }
    }

    fn shifted_left(&self, bits: u32) -> Self {
        Self {
            lo: self.lo.iter().map(|&x| x << bits).collect(),
            hi: self.hi.iter().map(|&x| x << bits).collect(),
        }
    }

    /// `c * self` about the same centre. Needs one extra bit of exponent when
    /// `(c - 1) * side` is odd on some axis; the caller passes boxes already
    /// at an exponent where it is even.
    pub fn inflated(&self, c: i64) -> Option<Self> {
        let mut lo = Vec::with_capacity(self.d());
        let mut hi = Vec::with_capacity(self.d());
        for i in 0..self.d() {
            let grow = (c - 1) * (self.hi[i] - self.lo[i]);
            if grow % 2 != 0 {
                return None;
            }
            lo.push(self.lo[i] - grow / 2);
            hi.push(self.hi[i] + grow / 2);
        }
        Some(Self { lo, hi })
    }
}

/// Finite union of closed lattice boxes with pairwise disjoint interiors.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ElementarySet {
    d: usize,
    exponent: u32,
    /// per box: `lo[0..d]` then `hi[0..d]`
    corners: Vec<i64>,
    volume_units: u128,
}

impl ElementarySet {
    pub fn empty(d: usize, exponent: u32) -> Self {
        Self {
            d,
            exponent,
            corners: Vec::new(),
            volume_units: 0,
        }
    }

    pub fn from_box(exponent: u32, b: LatticeBox) -> Self {
        let d = b.d();
        let v = b.volume_units();
        let mut corners = b.lo;
        corners.extend(b.hi);
        Self {
            d,
            exponent,
            corners,
            volume_units: v,
        }
    }

    /// Union of the unit cells `[c, c + 1]` at `exponent`; `cells` is flat.
    pub fn from_cells(d: usize, exponent: u32, cells: &[i64]) -> Self {
        let mut pts: Vec<&[i64]> = cells.chunks(d).collect();
        pts.sort();
        pts.dedup();
        let mut corners = Vec::with_capacity(pts.len() * 2 * d);
        for c in &pts {
            corners.extend_from_slice(c);
            corners.extend(c.iter().map(|x| x + 1));
        }
        Self {
            d,
            exponent,
            corners,
            volume_units: pts.len() as u128,
        }
    }

    /// Union of arbitrary boxes, normalized to non-overlapping pieces.
    pub fn from_boxes(d: usize, exponent: u32, boxes: &[LatticeBox]) -> Result<Self> {
        if boxes.iter().any(|b| b.d() != d) {
            return Err(Error::Malformed("box dimension mismatch".into()));
        }
        if boxes.iter().all(|b| (0..d).all(|i| b.hi[i] - b.lo[i] == 1)) {
            let flat: Vec<i64> = boxes.iter().flat_map(|b| b.lo.iter().copied()).collect();
            return Ok(Self::from_cells(d, exponent, &flat));
        }
        if d == 1 {
            return Ok(Self::from_intervals(exponent, boxes.iter().map(|b| (b.lo[0], b.hi[0])).collect()));
        }
        Self::compress(d, exponent, boxes)
    }

    fn from_intervals(exponent: u32, mut iv: Vec<(i64, i64)>) -> Self {
        iv.sort();
        let mut merged: Vec<(i64, i64)> = Vec::new();
        for (a, b) in iv {
            match merged.last_mut() {
                Some(last) if a < last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        let volume_units = merged.iter().map(|(a, b)| (b - a) as u128).sum();
        Self {
            d: 1,
            exponent,
            corners: merged.into_iter().flat_map(|(a, b)| [a, b]).collect(),
            volume_units,
        }
    }

    fn compress(d: usize, exponent: u32, boxes: &[LatticeBox]) -> Result<Self> {
        let mut axes: Vec<Vec<i64>> = vec![Vec::new(); d];
        for b in boxes {
            for i in 0..d {
                axes[i].push(b.lo[i]);
                axes[i].push(b.hi[i]);
            }
        }
        for a in &mut axes {
            a.sort();
            a.dedup();
        }
        let shape: Vec<usize> = axes.iter().map(|a| a.len().saturating_sub(1)).collect();
        let total: u128 = shape.iter().map(|&s| s as u128).product();
        if total > RASTER_BUDGET {
            return Err(Error::BudgetExceeded {
                step: 0,
                required: total,
                budget: RASTER_BUDGET,
            });
        }
        let mut strides = vec![1usize; d];
        for i in (0..d.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * shape[i + 1];
        }
        let mut mark = vec![false; total as usize];
        let mut idx_lo = vec![0usize; d];
        let mut idx_hi = vec![0usize; d];
        for b in boxes {
            for i in 0..d {
                idx_lo[i] = axes[i].binary_search(&b.lo[i]).unwrap();
                idx_hi[i] = axes[i].binary_search(&b.hi[i]).unwrap();
            }
            for_each_in_range(&idx_lo, &idx_hi, |cell| {
                let flat: usize = cell.iter().zip(&strides).map(|(c, s)| c * s).sum();
                mark[flat] = true;
            });
        }
        let mut out = Vec::new();
        let mut cell = vec![0usize; d];
        for (flat, &m) in mark.iter().enumerate() {
            if !m {
                continue;
            }
            let mut r = flat;
            for i in 0..d {
                cell[i] = r / strides[i];
                r %= strides[i];
            }
            let lo: Vec<i64> = (0..d).map(|i| axes[i][cell[i]]).collect();
            let hi: Vec<i64> = (0..d).map(|i| axes[i][cell[i] + 1]).collect();
            out.push(LatticeBox { lo, hi });
        }
        let mut s = Self::empty(d, exponent);
        for b in out {
            s.push_unchecked(b);
        }
        Ok(s)
    }

    fn push_unchecked(&mut self, b: LatticeBox) {
        self.volume_units += b.volume_units();
        self.corners.extend(b.lo);
        self.corners.extend(b.hi);
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn len(&self) -> usize {
        self.corners.len() / (2 * self.d)
    }

    pub fn is_empty(&self) -> bool {
        self.corners.is_empty()
    }

    pub fn box_at(&self, i: usize) -> LatticeBox {
        let c = &self.corners[i * 2 * self.d..(i + 1) * 2 * self.d];
        LatticeBox {
            lo: c[..self.d].to_vec(),
            hi: c[self.d..].to_vec(),
        }
    }

    pub fn boxes(&self) -> impl Iterator<Item = LatticeBox> + '_ {
        (0..self.len()).map(|i| self.box_at(i))
    }

    pub fn corners_flat(&self) -> &[i64] {
        &self.corners
    }

    /// Volume in units of `2^{-exponent * d}`.
    pub fn volume_units(&self) -> u128 {
        self.volume_units
    }

    pub fn volume(&self) -> f64 {
        self.volume_units as f64 * (-((self.exponent as usize * self.d) as f64)).exp2()
    }

    /// Exact test `volume <= num / den`.
    pub fn volume_at_most(&self, num: u128, den: u128) -> Result<bool> {
        let bits = self.exponent as usize * self.d;
        if bits > 100 {
            return Err(Error::Domain(format!("volume denominator 2^{bits} too large")));
        }
        Ok(self.volume_units * den <= num << bits)
    }

    pub fn rescaled(&self, exponent: u32) -> Result<Self> {
        if exponent < self.exponent {
            return Err(Error::Domain(format!(
                "cannot coarsen elementary set from exponent {} to {exponent}",
                self.exponent
            )));
        }
        let sh = exponent - self.exponent;
        Ok(Self {
            d: self.d,
            exponent,
            corners: self.corners.iter().map(|&x| x << sh).collect(),
            volume_units: self.volume_units << (sh as usize * self.d),
        })
    }

    pub fn translated(&self, v: &[i64]) -> Self {
        let d = self.d;
        let corners = self
            .corners
            .iter()
            .enumerate()
            .map(|(i, &x)| x + v[i % d])
            .collect();
        Self {
            d,
            exponent: self.exponent,
            corners,
            volume_units: self.volume_units,
        }
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        let w = self.exponent.max(other.exponent);
        let (a, b) = (self.rescaled(w)?, other.rescaled(w)?);
        let mut boxes: Vec<LatticeBox> = a.boxes().collect();
        boxes.extend(b.boxes());
        Self::from_boxes(self.d, w, &boxes)
    }

    pub fn union_all(d: usize, exponent: u32, parts: &[ElementarySet]) -> Result<Self> {
        let w = parts.iter().map(|p| p.exponent).max().unwrap_or(exponent).max(exponent);
        let mut boxes = Vec::new();
        for p in parts {
            boxes.extend(p.rescaled(w)?.boxes());
        }
        Self::from_boxes(d, w, &boxes)
    }

    /// Intersection with a box at the same exponent.
    pub fn clipped(&self, window: &LatticeBox) -> Self {
        let mut s = Self::empty(self.d, self.exponent);
        for b in self.boxes() {
            if let Some(c) = b.intersect(window) {
                s.push_unchecked(c);
            }
        }
        s
    }

    pub fn bounding_box(&self) -> Option<LatticeBox> {
        if self.is_empty() {
            return None;
        }
        let d = self.d;
        let mut lo = vec![i64::MAX; d];
        let mut hi = vec![i64::MIN; d];
        for b in self.boxes() {
            for i in 0..d {
                lo[i] = lo[i].min(b.lo[i]);
                hi[i] = hi[i].max(b.hi[i]);
            }
        }
        Some(LatticeBox { lo, hi })
    }

    pub fn is_within(&self, window: &LatticeBox) -> bool {
        self.boxes().all(|b| window.contains_box(&b))
    }

    /// Each box is contained in at least one of `windows`.
    pub fn boxes_within_any(&self, windows: &[LatticeBox]) -> bool {
        self.boxes().all(|b| windows.iter().any(|w| w.contains_box(&b)))
    }

    /// Pairwise disjoint interiors (checked by raster when the set is small).
    pub fn is_non_overlapping(&self) -> Result<bool> {
        let normalized = Self::from_boxes(self.d, self.exponent, &self.boxes().collect::<Vec<_>>())?;
        Ok(normalized.volume_units == self.volume_units)
    }
}

#[derive(Serialize, Deserialize)]
struct ElementarySetRecord {
    d: usize,
    exponent: u32,
    boxes: Vec<[Vec<i64>; 2]>,
}

impl Serialize for ElementarySet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ElementarySetRecord {
            d: self.d,
            exponent: self.exponent,
            boxes: self.boxes().map(|b| [b.lo, b.hi]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ElementarySet {
    /// Boxes are taken as stored; overlap is a verification concern, not a
    /// parse error.
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let r = ElementarySetRecord::deserialize(de)?;
        let mut s = ElementarySet::empty(r.d, r.exponent);
        for [lo, hi] in r.boxes {
            let b = LatticeBox::new(lo, hi).map_err(serde::de::Error::custom)?;
            if b.d() != r.d {
                return Err(serde::de::Error::custom("box dimension mismatch"));
            }
            s.push_unchecked(b);
        }
        Ok(s)
    }
}

/// Calls `f` on every integer vector in the half-open range `lo..hi`.
pub fn for_each_in_range<F: FnMut(&[usize])>(lo: &[usize], hi: &[usize], mut f: F) {
    let d = lo.len();
    if (0..d).any(|i| lo[i] >= hi[i]) {
        return;
    }
    let mut cur = lo.to_vec();
    loop {
        f(&cur);
        let mut i = d;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < hi[i] {
                break;
            }
            cur[i] = lo[i];
        }
    }
}

/// Lattice cells of `target` left uncovered by a union of boxes, all at one
/// exponent. Exact: the boxes are closed, so a cell is covered iff some box
/// contains it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageCount {
    pub total_cells: u128,
    pub uncovered_cells: u128,
}

impl CoverageCount {
    pub fn complete(&self) -> bool {
        self.uncovered_cells == 0
    }
}

/// Counts cells of `target` not met by any of the given boxes.
pub fn uncovered_cells<I: IntoIterator<Item = LatticeBox>>(target: &LatticeBox, boxes: I) -> Result<CoverageCount> {
    let d = target.d();
    let total = target.volume_units();
    if d == 1 {
        let mut iv: Vec<(i64, i64)> = boxes
            .into_iter()
            .filter_map(|b| b.intersect(target).map(|c| (c.lo[0], c.hi[0])))
            .collect();
        iv.sort_unstable();
        let mut covered: u128 = 0;
        let mut reach = target.lo[0];
        for (a, b) in iv {
            let a = a.max(reach);
            if b > a {
                covered += (b - a) as u128;
                reach = b;
            }
        }
        return Ok(CoverageCount {
            total_cells: total,
            uncovered_cells: total - covered,
        });
    }
    if total > RASTER_BUDGET {
        return Err(Error::BudgetExceeded {
            step: 0,
            required: total,
            budget: RASTER_BUDGET,
        });
    }
    let shape: Vec<usize> = (0..d).map(|i| (target.hi[i] - target.lo[i]) as usize).collect();
    // difference array with one extra slot per axis
    let ext: Vec<usize> = shape.iter().map(|s| s + 1).collect();
    let mut strides = vec![1usize; d];
    for i in (0..d - 1).rev() {
        strides[i] = strides[i + 1] * ext[i + 1];
    }
    let mut diff = vec![0i32; ext.iter().product()];
    for b in boxes {
        let Some(c) = b.intersect(target) else { continue };
        let lo: Vec<usize> = (0..d).map(|i| (c.lo[i] - target.lo[i]) as usize).collect();
        let hi: Vec<usize> = (0..d).map(|i| (c.hi[i] - target.lo[i]) as usize).collect();
        for mask in 0u32..(1 << d) {
            let mut idx = 0;
            let mut sign = 1;
            for i in 0..d {
                if mask >> i & 1 == 1 {
                    idx += hi[i] * strides[i];
                    sign = -sign;
                } else {
                    idx += lo[i] * strides[i];
                }
            }
            diff[idx] += sign;
        }
    }
    for axis in 0..d {
        let s = strides[axis];
        let n = ext[axis];
        for start in 0..diff.len() {
            if (start / s).is_multiple_of(n) {
                let mut acc = 0;
                for t in 0..n {
                    let k = start + t * s;
                    acc += diff[k];
                    diff[k] = acc;
                }
            }
        }
    }
    let mut uncovered = 0u128;
    for_each_in_range(&vec![0; d], &shape, |cell| {
        let idx: usize = cell.iter().zip(&strides).map(|(c, s)| c * s).sum();
        if diff[idx] == 0 {
            uncovered += 1;
        }
    });
    Ok(CoverageCount {
        total_cells: total,
        uncovered_cells: uncovered,
    })
}

/// Coverage of `target` by `points + set`, everything brought to a common
/// exponent first. Returns the exponent used with the counts.
pub fn sumset_coverage(points: &PointSet, set: &ElementarySet, target: &LatticeBox, target_exponent: u32) -> Result<(u32, CoverageCount)> {
    let w = points.exponent().max(set.exponent()).max(target_exponent);
    let pts = points.rescaled(w)?;
    let s = set.rescaled(w)?;
    let sh = w - target_exponent;
    let t = LatticeBox {
        lo: target.lo.iter().map(|&x| x << sh).collect(),
        hi: target.hi.iter().map(|&x| x << sh).collect(),
    };
    let work = pts.len() as u128 * s.len() as u128;
    if work > 1 << 31 {
        return Err(Error::BudgetExceeded {
            step: 0,
            required: work,
            budget: 1 << 31,
        });
    }
    let boxes = pts.iter().flat_map(|p| s.boxes().map(move |b| b.translated(p)));
    Ok((w, uncovered_cells(&t, boxes)?))
}

impl LatticeBox {
    /// The same box at a finer exponent.
    pub fn at_exponent(&self, from: u32, to: u32) -> Self {
        self.shifted_left(to - from)
    }
}
