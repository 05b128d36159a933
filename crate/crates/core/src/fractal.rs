//! Finite-resolution fractal sets: b-adic cube sets, covering and packing
//! numbers, gauge functions, dyadic Hausdorff content and uniform largeness.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{for_each_in_range, PointSet};

/// Cap on the number of cells a generator may produce.
pub const CELL_BUDGET: u128 = 1 << 24;
/// Extra levels a leaf cube may be refined by in the content DP.
pub const LEAF_REFINE_LEVELS: u32 = 40;
/// Box-dimension slope above which the log dimension is reported infinite.
pub const POSITIVE_DIMENSION_CUTOFF: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum CantorRule {
    /// Points whose base-`base` digits on axis `t` lie in `digits[t]` (one
    /// list is shared by all axes).
    Digits { base: u64, digits: Vec<Vec<u64>> },
    /// Keep `counts[i]` cells at level `exponents[i]` (base 2), each cell
    /// splitting evenly into the next count.
    SparseScale { counts: Vec<u64>, exponents: Vec<u32> },
}

/// Occupied cubes of side `base^{-k}` in `[0,1]^d`, sorted and deduplicated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicCubeSet {
    pub d: usize,
    #[serde(default = "two")]
    pub base: u64,
    pub k: u32,
    pub cells: Vec<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<CantorRule>,
}

fn two() -> u64 {
    2
}

fn pow_u128(b: u64, e: u32) -> Result<u128> {
    (b as u128)
        .checked_pow(e)
        .ok_or_else(|| Error::Domain(format!("{b}^{e} overflows")))
}

impl DyadicCubeSet {
    pub fn new(d: usize, base: u64, k: u32, mut cells: Vec<Vec<u64>>) -> Result<Self> {
        if d == 0 || base < 2 {
            return Err(Error::Domain("need d >= 1 and base >= 2".into()));
        }
        let side = pow_u128(base, k)?;
        if side > u64::MAX as u128 {
            return Err(Error::Domain("resolution too fine".into()));
        }
        for c in &cells {
            if c.len() != d || c.iter().any(|&x| x as u128 >= side) {
                return Err(Error::Malformed(format!("cell {c:?} outside [{side}]^{d}")));
            }
        }
        cells.sort();
        cells.dedup();
        Ok(Self {
            d,
            base,
            k,
            cells,
            generator: None,
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Distinct ancestors at level `j <= k`.
    pub fn ancestors(&self, j: u32) -> Result<Vec<Vec<u64>>> {
        if j > self.k {
            return Err(Error::Domain(format!("level {j} finer than resolution {}", self.k)));
        }
        let f = self.base.pow(self.k - j);
        let set: BTreeSet<Vec<u64>> = self.cells.iter().map(|c| c.iter().map(|x| x / f).collect()).collect();
        Ok(set.into_iter().collect())
    }

    /// Cells inside the level-`j` cube `q`.
    pub fn restricted(&self, j: u32, q: &[u64]) -> Result<Self> {
        if j > self.k {
            return Err(Error::Domain(format!("level {j} finer than resolution {}", self.k)));
        }
        let f = self.base.pow(self.k - j);
        let cells = self
            .cells
            .iter()
            .filter(|c| c.iter().zip(q).all(|(x, y)| x / f == *y))
            .cloned()
            .collect();
        Ok(Self {
            cells,
            generator: None,
            ..self.clone()
        })
    }

    /// Lower-left corners as a point set (base 2 only).
    pub fn corners(&self) -> Result<PointSet> {
        if self.base != 2 {
            return Err(Error::Domain("corner points need a dyadic set".into()));
        }
        PointSet::new(self.d, self.k, self.cells.iter().map(|c| c.iter().map(|&x| x as i64).collect()).collect())
    }

    /// Lower-left corners of any base, floored onto `2^{-w} Z^d`.
    pub fn corner_points(&self, w: u32) -> Result<PointSet> {
        let side = pow_u128(self.base, self.k)?;
        let pts = self
            .cells
            .iter()
            .map(|c| c.iter().map(|&x| ((x as u128) << w) / side).map(|x| x as i64).collect())
            .collect();
        PointSet::new(self.d, w, pts)
    }

    /// Rasterizes to the coarsest dyadic grid at least as fine as the
    /// b-adic one: every dyadic cell whose interior meets an occupied cell.
    pub fn to_dyadic(&self) -> Result<Self> {
        if self.base == 2 {
            return Ok(self.clone());
        }
        let bk = pow_u128(self.base, self.k)?;
        let mut k2 = 0u32;
        while (1u128 << k2) < bk {
            k2 += 1;
        }
        let two_k = 1u128 << k2;
        let mut out = Vec::new();
        for c in &self.cells {
            let ranges: Vec<(u64, u64)> = c
                .iter()
                .map(|&x| {
                    let lo = (x as u128 * two_k) / bk;
                    let hi = ((x as u128 + 1) * two_k).div_ceil(bk);
                    (lo as u64, hi as u64)
                })
                .collect();
            let lo: Vec<usize> = ranges.iter().map(|r| r.0 as usize).collect();
            let hi: Vec<usize> = ranges.iter().map(|r| r.1 as usize).collect();
            for_each_in_range(&lo, &hi, |c| out.push(c.iter().map(|&x| x as u64).collect()));
            if out.len() as u128 > CELL_BUDGET {
                return Err(Error::BudgetExceeded {
                    step: 0,
                    required: out.len() as u128,
                    budget: CELL_BUDGET,
                });
            }
        }
        let mut s = Self::new(self.d, 2, k2, out)?;
        s.generator = self.generator.clone();
        Ok(s)
    }
}

pub fn generate_cantor(d: usize, rule: &CantorRule, depth: u32) -> Result<DyadicCubeSet> {
    match rule {
        CantorRule::Digits { base, digits } => {
            let base = *base;
            if base < 2 || digits.is_empty() || (digits.len() != 1 && digits.len() != d) {
                return Err(Error::Malformed("digit rule needs base >= 2 and 1 or d digit lists".into()));
            }
            if digits.iter().any(|l| l.is_empty()) {
                return Err(Error::EmptySet("digit set"));
            }
            if digits.iter().flatten().any(|&x| x >= base) {
                return Err(Error::Malformed("digit not below base".into()));
            }
            let per_axis: Vec<Vec<u64>> = (0..d)
                .map(|t| {
                    let mut l = digits[if digits.len() == 1 { 0 } else { t }].clone();
                    l.sort();
                    l.dedup();
                    l
                })
                .collect();
            let total: u128 = per_axis
                .iter()
                .map(|l| pow_u128(l.len() as u64, depth))
                .product::<Result<u128>>()?;
            if total > CELL_BUDGET {
                return Err(Error::BudgetExceeded {
                    step: 0,
                    required: total,
                    budget: CELL_BUDGET,
                });
            }
            pow_u128(base, depth)?;
            let axis_values: Vec<Vec<u64>> = per_axis
                .iter()
                .map(|l| {
                    let mut vals = vec![0u64];
                    for _ in 0..depth {
                        vals = vals.iter().flat_map(|v| l.iter().map(move |x| v * base + x)).collect();
                    }
                    vals
                })
                .collect();
            let mut cells = vec![vec![]];
            for vals in &axis_values {
                cells = cells
                    .into_iter()
                    .flat_map(|c: Vec<u64>| {
                        vals.iter().map(move |&v| {
                            let mut c = c.clone();
                            c.push(v);
                            c
                        })
                    })
                    .collect();
            }
            let (out_base, k) = if base.is_power_of_two() {
                (2, depth * base.trailing_zeros())
            } else {
                (base, depth)
            };
            let mut s = DyadicCubeSet::new(d, out_base, k, cells)?;
            s.generator = Some(rule.clone());
            Ok(s)
        }
        CantorRule::SparseScale { counts, exponents } => {
            let n = depth as usize + 1;
            if counts.len() < n || exponents.len() < n {
                return Err(Error::Malformed("sparse rule shorter than depth".into()));
            }
            if counts[0] == 0 {
                return Err(Error::EmptySet("sparse rule"));
            }
            let mut cells: Vec<Vec<u64>> = spread_children(d, exponents[0], counts[0])?
                .into_iter()
                .collect();
            for i in 1..n {
                if exponents[i] <= exponents[i - 1] || counts[i] % counts[i - 1] != 0 {
                    return Err(Error::Malformed(format!("sparse rule step {i} not a refinement")));
                }
                if counts[i] as u128 * d as u128 > CELL_BUDGET || exponents[i] > 62 {
                    return Err(Error::BudgetExceeded {
                        step: i,
                        required: counts[i] as u128,
                        budget: CELL_BUDGET,
                    });
                }
                let r = counts[i] / counts[i - 1];
                let sh = exponents[i] - exponents[i - 1];
                let kids = spread_children(d, sh, r)?;
                cells = cells
                    .iter()
                    .flat_map(|c| {
                        kids.iter()
                            .map(|u| c.iter().zip(u).map(|(x, y)| (x << sh) + y).collect::<Vec<u64>>())
                            .collect::<Vec<_>>()
                    })
                    .collect();
            }
            let mut s = DyadicCubeSet::new(d, 2, exponents[n - 1], cells)?;
            s.generator = Some(rule.clone());
            Ok(s)
        }
    }
}

/// `r` evenly spaced sub-cells (lexicographic order) among the `2^{sh d}`.
fn spread_children(d: usize, sh: u32, r: u64) -> Result<Vec<Vec<u64>>> {
    let per = 1u128 << sh;
    let total = per.pow(d as u32);
    if r as u128 > total || r == 0 {
        return Err(Error::Domain(format!("cannot place {r} cells among {total}")));
    }
    let stride = total / r as u128;
    Ok((0..r as u128)
        .map(|i| {
            let mut idx = i * stride;
            let mut c = vec![0u64; d];
            for t in (0..d).rev() {
                c[t] = (idx % per) as u64;
                idx /= per;
            }
            c
        })
        .collect())
}

/// Number of level-`j` grid cells meeting `a` (side `base^{-j}`).
pub fn covering_number(a: &DyadicCubeSet, j: u32) -> Result<usize> {
    Ok(a.ancestors(j)?.len())
}

/// Distinct half-open grid cells of side `2^{-j}` holding a point; points on
/// the far boundary of `[0,1]^d` fall into the last cell.
pub fn grid_count_points(a: &PointSet, j: u32) -> Result<usize> {
    if j > a.exponent() {
        return Err(Error::Domain("grid finer than point resolution".into()));
    }
    let sh = a.exponent() - j;
    let last = (1i64 << j) - 1;
    let set: BTreeSet<Vec<i64>> = a
        .iter()
        .map(|p| p.iter().map(|&x| if x >> sh > last && x == 1i64 << a.exponent() { last } else { x >> sh }).collect())
        .collect();
    Ok(set.len())
}

fn sup_dist(x: &[i64], y: &[i64]) -> i64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).max().unwrap_or(0)
}

/// Greedy maximal packing by closed sup-balls of radius `2^{-e}` centred in
/// `a`, points taken in lexicographic order. Returns the centres.
pub fn packing_greedy(a: &PointSet, e: u32) -> Result<Vec<Vec<i64>>> {
    if e > a.exponent() {
        return Err(Error::Domain("radius finer than point resolution".into()));
    }
    let two_r = 2i64 << (a.exponent() - e);
    let mut centres: Vec<Vec<i64>> = Vec::new();
    for p in a.iter() {
        if centres.iter().all(|c| sup_dist(c, p) > two_r) {
            centres.push(p.to_vec());
        }
    }
    Ok(centres)
}

pub fn packing_number_greedy(a: &PointSet, e: u32) -> Result<usize> {
    Ok(packing_greedy(a, e)?.len())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallCover {
    pub count: usize,
    /// False when only a greedy upper bound was computed.
    pub exact: bool,
}

/// Points up to which the exact subset search is used for `d >= 2`.
pub const EXACT_BALL_COVER_POINTS: usize = 16;

/// Minimal number of closed sup-balls of radius `2^{-e}` covering `a`.
/// Exact for `d = 1` and for at most [`EXACT_BALL_COVER_POINTS`] points.
pub fn ball_covering_number(a: &PointSet, e: u32) -> Result<BallCover> {
    if e > a.exponent() {
        return Err(Error::Domain("radius finer than point resolution".into()));
    }
    let diam = 2i64 << (a.exponent() - e);
    let pts: Vec<&[i64]> = a.iter().collect();
    let n = pts.len();
    if n == 0 {
        return Ok(BallCover { count: 0, exact: true });
    }
    if a.d() == 1 {
        let mut count = 0;
        let mut reach = i64::MIN;
        for p in &pts {
            if p[0] > reach {
                count += 1;
                reach = p[0] + diam;
            }
        }
        return Ok(BallCover { count, exact: true });
    }
    let fits = |mask: u32| -> bool {
        mask == 0
            || (0..a.d()).all(|t| {
            let (mut lo, mut hi) = (i64::MAX, i64::MIN);
            for (i, p) in pts.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    lo = lo.min(p[t]);
                    hi = hi.max(p[t]);
                }
            }
            hi - lo <= diam
        })
    };
    if n <= EXACT_BALL_COVER_POINTS {
        let full = (1u32 << n) - 1;
        let ok: Vec<bool> = (0..=full).map(fits).collect();
        let mut best = vec![u8::MAX; full as usize + 1];
        best[0] = 0;
        for mask in 1..=full {
            let low = mask & mask.wrapping_neg();
            let rest = mask ^ low;
            let mut sub = rest;
            let mut b = u8::MAX;
            loop {
                let group = sub | low;
                if ok[group as usize] {
                    b = b.min(best[(mask ^ group) as usize].saturating_add(1));
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
            best[mask as usize] = b;
        }
        return Ok(BallCover {
            count: best[full as usize] as usize,
            exact: true,
        });
    }
    Ok(BallCover {
        count: packing_number_greedy(a, e + 1)?.max(1).min(n),
        exact: false,
    })
}

/// Exact sup-norm Hausdorff distance in lattice units at the finer exponent.
pub fn hausdorff_distance_units(a: &PointSet, b: &PointSet) -> Result<(u32, i64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet("Hausdorff distance input"));
    }
    if a.d() != b.d() {
        return Err(Error::Malformed("dimension mismatch".into()));
    }
    let w = a.exponent().max(b.exponent());
    let (a, b) = (a.rescaled(w)?, b.rescaled(w)?);
    let one_sided = |x: &PointSet, y: &PointSet| {
        x.iter()
            .map(|p| y.iter().map(|q| sup_dist(p, q)).min().unwrap_or(0))
            .max()
            .unwrap_or(0)
    };
    Ok((w, one_sided(&a, &b).max(one_sided(&b, &a))))
}

pub fn hausdorff_distance(a: &PointSet, b: &PointSet) -> Result<f64> {
    let (w, u) = hausdorff_distance_units(a, b)?;
    Ok(u as f64 / (w as f64).exp2())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GaugeFunction {
    /// `x^alpha`
    Power { alpha: f64 },
    /// `log^{-s}(1/x)`, defined for `x < 1`.
    LogPower { s: f64 },
    /// Right-continuous step function through `(x, value)` knots.
    Tabulated { knots: Vec<(f64, f64)> },
}

impl GaugeFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            GaugeFunction::Power { alpha } if *alpha > 0.0 && alpha.is_finite() => Ok(()),
            GaugeFunction::LogPower { s } if *s > 0.0 && s.is_finite() => Ok(()),
            GaugeFunction::Tabulated { knots } => {
                let ok = !knots.is_empty()
                    && knots.iter().all(|(x, v)| *x > 0.0 && *v > 0.0 && v.is_finite())
                    && knots.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1);
                if ok {
                    Ok(())
                } else {
                    Err(Error::Domain("tabulated gauge must be positive, increasing".into()))
                }
            }
            _ => Err(Error::Domain(format!("invalid gauge {self:?}"))),
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        if x < 0.0 || !x.is_finite() {
            return Err(Error::Domain(format!("gauge argument {x}")));
        }
        match self {
            GaugeFunction::Power { alpha } => Ok(x.powf(*alpha)),
            GaugeFunction::LogPower { s } => {
                if x >= 1.0 {
                    Err(Error::Domain(format!("log gauge undefined at {x}")))
                } else {
                    Ok((1.0 / x).ln().powf(-s))
                }
            }
            GaugeFunction::Tabulated { knots } => {
                let i = knots.partition_point(|(k, _)| *k <= x);
                Ok(knots[i.saturating_sub(1)].1)
            }
        }
    }
}

/// `phi1(2^{-k}) / phi2(2^{-k})` for `k = 1..=kmax`; `phi2 < phi1` in the
/// gauge order when these tend to 0.
pub fn gauge_ratios(phi1: &GaugeFunction, phi2: &GaugeFunction, kmax: u32) -> Result<Vec<f64>> {
    (1..=kmax)
        .map(|k| {
            let x = (-(k as f64)).exp2();
            Ok(phi1.eval(x)? / phi2.eval(x)?)
        })
        .collect()
}

/// Dyadic-tree costs: for each level from `k` down to `top`, the optimal
/// cover cost of `A ∩ Q` for every occupied `Q` at that level.
fn content_tree(a: &DyadicCubeSet, phi: &GaugeFunction, top: u32) -> Result<Vec<BTreeMap<Vec<u64>, f64>>> {
    phi.validate()?;
    if top > a.k {
        return Err(Error::Domain(format!("scale level {top} finer than resolution {}", a.k)));
    }
    let b = a.base as f64;
    let side = |lvl: u32| b.powi(-(lvl as i32));
    let child_factor = b.powi(a.d as i32);
    let mut leaf = f64::INFINITY;
    let mut mult = 1.0;
    for extra in 0..=LEAF_REFINE_LEVELS {
        let v = mult * phi.eval(side(a.k + extra))?;
        leaf = leaf.min(v);
        mult *= child_factor;
    }
    let mut levels = vec![a.cells.iter().map(|c| (c.clone(), leaf)).collect::<BTreeMap<_, _>>()];
    for lvl in (top..a.k).rev() {
        let own = phi.eval(side(lvl))?;
        let mut next: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
        for (c, v) in levels.last().unwrap() {
            *next.entry(c.iter().map(|x| x / a.base).collect()).or_insert(0.0) += v;
        }
        for v in next.values_mut() {
            *v = v.min(own);
        }
        levels.push(next);
    }
    levels.reverse();
    Ok(levels)
}

/// Optimal cost of covering `A` by b-adic cubes of side at most
/// `base^{-top}`; leaves may refine by up to [`LEAF_REFINE_LEVELS`] levels.
pub fn hausdorff_content_dyadic(a: &DyadicCubeSet, phi: &GaugeFunction, top: u32) -> Result<f64> {
    let tree = content_tree(a, phi, top)?;
    Ok(tree[0].values().sum())
}

/// Content of `A ∩ Q` for every occupied cube `Q` at `level`, covers using
/// subcubes of `Q`.
pub fn cube_contents(a: &DyadicCubeSet, phi: &GaugeFunction, level: u32) -> Result<BTreeMap<Vec<u64>, f64>> {
    Ok(content_tree(a, phi, level)?.swap_remove(0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCertificate {
    /// dyadic level of the cubes `Q`
    pub level: u32,
    /// `delta_k = 2^{-scale}`
    pub scale: u32,
    pub n_k: f64,
    pub min_count: usize,
    /// `(Q, |A' ∩ Q|_{delta_k})` for every retained `Q`
    pub counts: Vec<(Vec<u64>, usize)>,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformLargeCertificate {
    pub schema: String,
    pub eta: f64,
    pub gauge: GaugeFunction,
    pub total_content: f64,
    pub pruned_per_level: Vec<usize>,
    pub levels: Vec<LevelCertificate>,
    /// Covering numbers are grid counts, not ball counts.
    pub covering_convention: String,
    pub pass: bool,
}

/// Prunes `A` level by level, keeping cubes whose content exceeds
/// `2^{-3 l d} eta`, then certifies `|A' ∩ Q|_{delta_k} >= N_k` for every
/// retained level-`k` cube. `scales[k]` is the exponent of `delta_k`.
pub fn uniform_large_subset(
    a: &DyadicCubeSet,
    phi: &GaugeFunction,
    eta: f64,
    scales: &[u32],
) -> Result<(DyadicCubeSet, Vec<f64>, UniformLargeCertificate)> {
    if a.base != 2 {
        return Err(Error::Domain("uniform largeness needs a dyadic set".into()));
    }
    if !(eta > 0.0) {
        return Err(Error::Domain("eta must be positive".into()));
    }
    let d = a.d as i32;
    let weight = |k: usize| (3.0 * k as f64 * d as f64 + 1.0).exp2();
    let mut bad = Vec::new();
    let mut prev = f64::INFINITY;
    for (k, &e) in scales.iter().enumerate() {
        if (e as usize) < k || e > a.k {
            bad.push(k);
            continue;
        }
        let h = weight(k) * phi.eval((-(e as f64)).exp2())?;
        if !(h < prev) {
            bad.push(k);
        }
        prev = h;
    }
    if !bad.is_empty() {
        return Err(Error::Invariant {
            invariant: "2^{3kd+1} phi(delta_k) decreasing to 0, k <= e_k <= resolution".into(),
            step: bad[0],
            detail: format!("violating k: {bad:?}"),
        });
    }
    let total = hausdorff_content_dyadic(a, phi, 0)?;
    if total < eta {
        return Err(Error::Threshold {
            what: "content below eta".into(),
            measured: total,
            required: eta,
        });
    }
    let mut cur = a.clone();
    let mut pruned = vec![0usize];
    for lvl in 1..=a.k {
        let eta_l = eta * (-(3.0 * lvl as f64 * d as f64)).exp2();
        let contents = cube_contents(&cur, phi, lvl)?;
        let keep: BTreeSet<&Vec<u64>> = contents.iter().filter(|(_, v)| **v > eta_l).map(|(c, _)| c).collect();
        let f = 1u64 << (a.k - lvl);
        let before = contents.len();
        let cells: Vec<Vec<u64>> = cur
            .cells
            .iter()
            .filter(|c| keep.contains(&c.iter().map(|x| x / f).collect::<Vec<_>>()))
            .cloned()
            .collect();
        pruned.push(before - keep.len());
        cur = DyadicCubeSet::new(a.d, 2, a.k, cells)?;
    }
    let mut n_ks = Vec::new();
    let mut levels = Vec::new();
    for (k, &e) in scales.iter().enumerate() {
        let n_k = eta / (weight(k) * phi.eval((-(e as f64)).exp2())?);
        n_ks.push(n_k);
        let mut counts = Vec::new();
        for q in cur.ancestors(k as u32)? {
            let c = covering_number(&cur.restricted(k as u32, &q)?, e)?;
            counts.push((q, c));
        }
        let min_count = counts.iter().map(|c| c.1).min().unwrap_or(0);
        levels.push(LevelCertificate {
            level: k as u32,
            scale: e,
            n_k,
            min_count,
            holds: counts.iter().all(|c| c.1 as f64 >= n_k),
            counts,
        });
    }
    let pass = !cur.is_empty() && levels.iter().all(|l| l.holds);
    let mut out = cur;
    out.generator = a.generator.clone();
    Ok((
        out,
        n_ks,
        UniformLargeCertificate {
            schema: crate::SCHEMA.into(),
            eta,
            gauge: phi.clone(),
            total_content: total,
            pruned_per_level: pruned,
            levels,
            covering_convention: "grid cells of side delta; ball counts agree up to 5^d".into(),
            pass,
        },
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimensionVariant {
    Hausdorff,
    Packing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LogDimension {
    Finite { estimate: f64 },
    Infinite { box_slope: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogDimensionReport {
    pub variant: DimensionVariant,
    /// `(log(1/delta), covering count)` pairs used
    pub scales: Vec<(f64, usize)>,
    pub value: LogDimension,
    pub heuristic: bool,
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if var == 0.0 {
        0.0
    } else {
        cov / var
    }
}

/// Box-counting proxy for the logarithmic dimension: slope of
/// `log |A|_delta` against `log log (1/delta)`. Uses the generator's scales
/// when it has them, otherwise every level `1..=k`. Reported infinite when
/// the slope against `log(1/delta)` over the finer half of the scales is at
/// least [`POSITIVE_DIMENSION_CUTOFF`].
pub fn log_dimension_estimate(a: &DyadicCubeSet, variant: DimensionVariant) -> Result<LogDimensionReport> {
    let levels: Vec<u32> = match &a.generator {
        Some(CantorRule::SparseScale { exponents, .. }) => exponents.iter().copied().filter(|&e| e >= 1 && e <= a.k).collect(),
        Some(CantorRule::Digits { base, .. }) if a.base == 2 && base.is_power_of_two() => {
            let step = base.trailing_zeros();
            (1..=a.k / step).map(|i| i * step).collect()
        }
        _ => (1..=a.k).collect(),
    };
    if levels.len() < 3 {
        return Err(Error::Domain(format!("need at least 3 scales, have {}", levels.len())));
    }
    let lb = (a.base as f64).ln();
    let scales: Vec<(f64, usize)> = levels
        .iter()
        .map(|&j| Ok((j as f64 * lb, covering_number(a, j)?)))
        .collect::<Result<_>>()?;
    let ys: Vec<f64> = scales.iter().map(|s| (s.1 as f64).ln()).collect();
    let xs_box: Vec<f64> = scales.iter().map(|s| s.0).collect();
    let half = scales.len() / 2;
    let box_slope = ls_slope(&xs_box[half..], &ys[half..]);
    let value = if box_slope >= POSITIVE_DIMENSION_CUTOFF {
        LogDimension::Infinite { box_slope }
    } else {
        let xs: Vec<f64> = scales.iter().map(|s| s.0.ln()).collect();
        LogDimension::Finite {
            estimate: ls_slope(&xs, &ys),
        }
    };
    Ok(LogDimensionReport {
        variant,
        scales,
        value,
        heuristic: true,
    })
}

/// A named largeness function `N(delta)` with the scale schedule it is
/// evaluated on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LargenessProfile {
    /// `N(delta) = log^{power}(1/delta)`
    pub log_power: f64,
    /// Exponents of `delta_k`, strictly increasing.
    pub scales: Vec<u32>,
    /// `N_k`, nondecreasing.
    pub counts: Vec<f64>,
    pub c: f64,
    pub eta: f64,
    pub eps: f64,
}

impl LargenessProfile {
    pub fn n_of(&self, delta: f64) -> f64 {
        (1.0 / delta).ln().powf(self.log_power)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.log_power > 0.0
            && self.scales.len() == self.counts.len()
            && self.scales.windows(2).all(|w| w[0] < w[1])
            && self.counts.windows(2).all(|w| w[0] <= w[1]);
        if ok {
            Ok(())
        } else {
            Err(Error::Domain("largeness profile not monotone".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(d: usize, w: u32, v: &[&[i64]]) -> PointSet {
        PointSet::new(d, w, v.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn cantor_examples() {
        let full = generate_cantor(1, &CantorRule::Digits { base: 2, digits: vec![vec![0, 1]] }, 5).unwrap();
        assert_eq!(full.len(), 32);
        for j in 0..=5 {
            assert_eq!(covering_number(&full, j).unwrap(), 1 << j);
        }
        let mt = generate_cantor(1, &CantorRule::Digits { base: 3, digits: vec![vec![0, 2]] }, 2).unwrap();
        assert_eq!(mt.cells, vec![vec![0], vec![2], vec![6], vec![8]]);
        assert_eq!(covering_number(&mt, 2).unwrap(), 4);
        let sparse = generate_cantor(
            1,
            &CantorRule::SparseScale {
                counts: vec![1, 2, 4, 8],
                exponents: vec![1, 2, 4, 8],
            },
            3,
        )
        .unwrap();
        assert_eq!(covering_number(&sparse, 8).unwrap(), 8);
        assert!(generate_cantor(1, &CantorRule::Digits { base: 3, digits: vec![vec![]] }, 2).is_err());
    }

    #[test]
    fn rasterized_middle_thirds() {
        let mt = generate_cantor(1, &CantorRule::Digits { base: 3, digits: vec![vec![0, 2]] }, 2).unwrap();
        let r = mt.to_dyadic().unwrap();
        assert_eq!(r.k, 4);
        // [0,1/9] -> cells 0,1; [2/9,1/3] -> 3,4,5; [2/3,7/9] -> 10,11,12; [8/9,1] -> 14,15
        let got: Vec<u64> = r.cells.iter().map(|c| c[0]).collect();
        assert_eq!(got, vec![0, 1, 3, 4, 5, 10, 11, 12, 14, 15]);
    }

    #[test]
    fn empty_covering_is_zero() {
        let e = DyadicCubeSet::new(1, 2, 3, vec![]).unwrap();
        assert_eq!(covering_number(&e, 2).unwrap(), 0);
    }

    #[test]
    fn packing_examples() {
        let a = pts(1, 2, &[&[0], &[1], &[2], &[3], &[4]]);
        assert_eq!(packing_greedy(&a, 2).unwrap(), vec![vec![0], vec![3]]);
        assert_eq!(packing_number_greedy(&pts(2, 3, &[&[1, 1]]), 1).unwrap(), 1);
        let spaced = pts(1, 6, &[&[0], &[9], &[18], &[27]]);
        assert_eq!(packing_number_greedy(&spaced, 4).unwrap(), 4);
        assert_eq!(packing_number_greedy(&spaced, 3).unwrap(), 2);
    }

    /// Exhaustive maximum packing: largest subset with pairwise distance > 2r.
    fn max_packing(a: &PointSet, e: u32) -> usize {
        let p: Vec<&[i64]> = a.iter().collect();
        let two_r = 2i64 << (a.exponent() - e);
        (0u32..1 << p.len())
            .filter(|m| {
                (0..p.len()).all(|i| (i + 1..p.len()).all(|j| m >> i & 1 == 0 || m >> j & 1 == 0 || sup_dist(p[i], p[j]) > two_r))
            })
            .map(|m| m.count_ones() as usize)
            .max()
            .unwrap()
    }

    #[test]
    fn packing_example_is_maximum() {
        let a = pts(1, 2, &[&[0], &[1], &[2], &[3], &[4]]);
        assert_eq!(max_packing(&a, 2), 2);
    }

    #[test]
    fn ball_cover_exact_small() {
        let a = pts(2, 3, &[&[0, 0], &[2, 0], &[0, 2], &[5, 5], &[7, 7]]);
        // radius 1/8 -> diameter 2 units
        assert_eq!(ball_covering_number(&a, 3).unwrap(), BallCover { count: 2, exact: true });
        let b = pts(1, 3, &[&[0], &[2], &[3], &[8]]);
        assert_eq!(ball_covering_number(&b, 3).unwrap().count, 3);
    }

    #[test]
    fn hausdorff_examples() {
        let z = pts(1, 1, &[&[0]]);
        let o = pts(1, 1, &[&[2]]);
        assert_eq!(hausdorff_distance(&z, &z).unwrap(), 0.0);
        assert_eq!(hausdorff_distance(&z, &o).unwrap(), 1.0);
        let ends = pts(1, 1, &[&[0], &[2]]);
        let mid = pts(1, 1, &[&[1]]);
        assert_eq!(hausdorff_distance(&ends, &mid).unwrap(), 0.5);
        assert!(hausdorff_distance(&PointSet::empty(1, 0), &z).is_err());
    }

    #[test]
    fn content_full_cube() {
        for d in 1..=2 {
            let full = generate_cantor(d, &CantorRule::Digits { base: 2, digits: vec![vec![0, 1]] }, 3).unwrap();
            let phi = GaugeFunction::Power { alpha: d as f64 };
            for top in 0..=3 {
                assert!((hausdorff_content_dyadic(&full, &phi, top).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn content_single_cube_closed_form() {
        let k = 3;
        let one = DyadicCubeSet::new(1, 2, k, vec![vec![5]]).unwrap();
        for s in [0.3, 0.7, 1.0] {
            let phi = GaugeFunction::Power { alpha: s };
            let oracle = (k..=k + LEAF_REFINE_LEVELS)
                .map(|j| ((j - k) as f64).exp2() * (-(j as f64) * s).exp2())
                .fold(f64::INFINITY, f64::min);
            let got = hausdorff_content_dyadic(&one, &phi, 0).unwrap();
            assert!((got - oracle).abs() < 1e-15);
            if s < 1.0 {
                assert!((got - (-(k as f64) * s).exp2()).abs() < 1e-15);
            }
        }
    }

    /// All cuts of the cube tree: each cut covers every leaf exactly once.
    fn best_cut(a: &DyadicCubeSet, phi: &GaugeFunction, lvl: u32, q: &[u64]) -> f64 {
        let own = phi.eval((a.base as f64).powi(-(lvl as i32))).unwrap();
        let sub = a.restricted(lvl, q).unwrap();
        if lvl == a.k {
            let mut best = f64::INFINITY;
            let mut mult = 1.0;
            for extra in 0..=LEAF_REFINE_LEVELS {
                best = f64::min(best, mult * phi.eval((a.base as f64).powi(-((a.k + extra) as i32))).unwrap());
                mult *= (a.base as f64).powi(a.d as i32);
            }
            return best;
        }
        let kids: f64 = sub.ancestors(lvl + 1).unwrap().iter().map(|c| best_cut(a, phi, lvl + 1, c)).sum();
        own.min(kids)
    }

    #[test]
    fn content_matches_cut_enumeration() {
        for depth in 1..=5 {
            let mt = generate_cantor(1, &CantorRule::Digits { base: 3, digits: vec![vec![0, 2]] }, depth).unwrap();
            let phi = GaugeFunction::Power { alpha: 1.0 };
            let got = hausdorff_content_dyadic(&mt, &phi, 0).unwrap();
            assert!((got - best_cut(&mt, &phi, 0, &[0])).abs() < 1e-12);
            assert!((got - (2.0f64 / 3.0).powi(depth as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn log_gauge_needs_small_scales() {
        let full = generate_cantor(1, &CantorRule::Digits { base: 2, digits: vec![vec![0, 1]] }, 3).unwrap();
        let phi = GaugeFunction::LogPower { s: 1.0 };
        assert!(hausdorff_content_dyadic(&full, &phi, 0).is_err());
        assert!(hausdorff_content_dyadic(&full, &phi, 1).is_ok());
    }

    #[test]
    fn gauge_order_sampled() {
        let r = gauge_ratios(&GaugeFunction::Power { alpha: 0.5 }, &GaugeFunction::Power { alpha: 0.3 }, 40).unwrap();
        assert!(r.windows(2).all(|w| w[1] < w[0]));
        assert!(r[39] < 0.01);
    }

    #[test]
    fn uniform_large_full_interval() {
        let full = generate_cantor(1, &CantorRule::Digits { base: 2, digits: vec![vec![0, 1]] }, 6).unwrap();
        let phi = GaugeFunction::Power { alpha: 2.0 };
        let total = hausdorff_content_dyadic(&full, &phi, 0).unwrap();
        let (a2, nk, cert) = uniform_large_subset(&full, &phi, total, &[2, 4, 6]).unwrap();
        assert_eq!(a2.len(), 64);
        assert!(cert.pruned_per_level.iter().all(|&p| p == 0));
        assert!(cert.pass);
        assert_eq!(nk.len(), 3);
    }

    #[test]
    fn uniform_large_eta_too_big() {
        let mt = generate_cantor(1, &CantorRule::Digits { base: 4, digits: vec![vec![0, 3]] }, 4).unwrap();
        let phi = GaugeFunction::Power { alpha: 0.5 };
        assert!(matches!(uniform_large_subset(&mt, &phi, 10.0, &[0, 8]), Err(Error::Threshold { .. })));
        assert!(matches!(uniform_large_subset(&mt, &phi, 0.1, &[2, 4]), Err(Error::Invariant { .. })));
    }

    #[test]
    fn uniform_large_recount() {
        let mt = generate_cantor(1, &CantorRule::Digits { base: 3, digits: vec![vec![0, 2]] }, 4)
            .unwrap()
            .to_dyadic()
            .unwrap();
        let phi = GaugeFunction::Power { alpha: 0.6 };
        let total = hausdorff_content_dyadic(&mt, &phi, 0).unwrap();
        let (a2, _, cert) = uniform_large_subset(&mt, &phi, total, &[0, 6]).unwrap();
        assert!(cert.pass);
        for lvl in &cert.levels {
            for (q, c) in &lvl.counts {
                // independent recount: cells of A' inside Q at the scale
                let f = 1u64 << (a2.k - lvl.level);
                let g = 1u64 << (a2.k - lvl.scale);
                let direct: BTreeSet<u64> = a2.cells.iter().filter(|x| x[0] / f == q[0]).map(|x| x[0] / g).collect();
                assert_eq!(direct.len(), *c);
            }
        }
    }

    #[test]
    fn log_dimension_examples() {
        let mt = generate_cantor(1, &CantorRule::Digits { base: 3, digits: vec![vec![0, 2]] }, 6).unwrap();
        assert!(matches!(
            log_dimension_estimate(&mt, DimensionVariant::Hausdorff).unwrap().value,
            LogDimension::Infinite { .. }
        ));
        let sparse = generate_cantor(
            1,
            &CantorRule::SparseScale {
                counts: vec![1, 2, 4, 8, 16],
                exponents: vec![1, 2, 4, 8, 16],
            },
            4,
        )
        .unwrap();
        match log_dimension_estimate(&sparse, DimensionVariant::Packing).unwrap().value {
            LogDimension::Finite { estimate } => assert!((estimate - 1.0).abs() < 0.1, "{estimate}"),
            v => panic!("{v:?}"),
        }
        let point = DyadicCubeSet::new(1, 2, 6, vec![vec![17]]).unwrap();
        match log_dimension_estimate(&point, DimensionVariant::Hausdorff).unwrap().value {
            LogDimension::Finite { estimate } => assert_eq!(estimate, 0.0),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let mt = generate_cantor(2, &CantorRule::Digits { base: 3, digits: vec![vec![0, 2]] }, 1).unwrap();
        let s = serde_json::to_string(&mt).unwrap();
        assert_eq!(serde_json::from_str::<DyadicCubeSet>(&s).unwrap(), mt);
    }
}
