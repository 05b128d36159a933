//! The full-measure construction: `B_j` as unions of dyadic cubes, each
//! cube replaced by a patch complement at the next level.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use serde_with::DisplayFromStr;
use sha2::{Digest, Sha256};

use super::InvariantCheck;
use crate::error::{Error, Result};
use crate::fractal::{generate_cantor, uniform_large_subset, CantorRule, GaugeFunction, UniformLargeCertificate};
use crate::geometry::{ElementarySet, LatticeBox};
use crate::large_sumset::{continuous_patch_complement, cube_offsets, PatchDesign, PatchRule};
use crate::threshold::{ThresholdCheck, ThresholdPolicy};
use crate::{Rational, SCHEMA};

/// Cell lists up to this many cells are stored inline in the trace.
pub const INLINE_CELLS: usize = 1 << 14;
pub const DEFAULT_PIXEL_BUDGET: u128 = 1 << 30;

#[serde_with::serde_as]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullMeasureConfig {
    pub d: usize,
    /// The test set `A` is `generate_cantor(d, generator, generator_depth)`.
    pub generator: CantorRule,
    pub generator_depth: u32,
    pub gauge: GaugeFunction,
    /// Content threshold for the uniform-largeness certificate.
    pub eta: f64,
    /// `delta_k = 2^{-schedule[k]}` for the certificate.
    pub schedule: Vec<u32>,
    pub eps: Rational,
    pub depth: u32,
    pub patch_eta: Rational,
    pub patch_rule: PatchRule,
    pub field_cap: u64,
    pub policy: ThresholdPolicy,
    #[serde_as(as = "DisplayFromStr")]
    pub pixel_budget: u128,
}

#[serde_with::serde_as]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullMeasureLevel {
    pub j: u32,
    /// `B_j` is a union of cubes of side `2^{-exponent}`.
    pub exponent: u32,
    pub cell_count: usize,
    /// Lower corners, flat; present when small.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<i64>>,
    pub cells_sha256: String,
    pub a_prime_size: usize,
    pub a_prime_sha256: String,
    /// Pixels of `[0,1]^d` at `2^{-exponent}` not in `A'_j + B_j`.
    #[serde_as(as = "DisplayFromStr")]
    pub uncovered_pixels: u128,
    #[serde_as(as = "DisplayFromStr")]
    pub total_pixels: u128,
    /// Pixels covered at `j - 1` and lost at `j`.
    #[serde_as(as = "DisplayFromStr")]
    pub lost_pixels: u128,
    /// `|B''_j|` in units of `2^{-(exponent+1) d}`.
    #[serde_as(as = "DisplayFromStr")]
    pub inflated_volume_units: u128,
    /// `min_a |A ∩ R_0(a)|_delta` against `N'` for the step producing this level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub largeness: Option<ThresholdCheck>,
    pub checks: Vec<InvariantCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullMeasureTrace {
    pub schema: String,
    pub config: FullMeasureConfig,
    pub patch_k: u64,
    pub patch_m: u64,
    pub patch_cells: usize,
    pub certificate: UniformLargeCertificate,
    pub levels: Vec<FullMeasureLevel>,
    pub pass: bool,
}

fn digest(flat: &[i64]) -> String {
    let mut h = Sha256::new();
    for x in flat {
        h.update(x.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Bit set over a box of the integer lattice.
struct Raster {
    lo: Vec<i64>,
    shape: Vec<i64>,
    words: Vec<u64>,
}

impl Raster {
    fn new(lo: Vec<i64>, shape: Vec<i64>) -> Self {
        let n: i64 = shape.iter().product();
        Self {
            lo,
            shape,
            words: vec![0; (n as usize).div_ceil(64)],
        }
    }

    fn index(&self, p: &[i64]) -> Option<usize> {
        let mut idx = 0i64;
        for i in 0..p.len() {
            let x = p[i] - self.lo[i];
            if x < 0 || x >= self.shape[i] {
                return None;
            }
            idx = idx * self.shape[i] + x;
        }
        Some(idx as usize)
    }

    fn set(&mut self, p: &[i64]) {
        if let Some(i) = self.index(p) {
            self.words[i / 64] |= 1 << (i % 64);
        }
    }

    fn get(&self, p: &[i64]) -> bool {
        self.index(p).is_some_and(|i| self.words[i / 64] >> (i % 64) & 1 == 1)
    }

    fn count(&self) -> u128 {
        self.words.iter().map(|w| w.count_ones() as u128).sum()
    }

    fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
    }

    fn for_each_set<F: FnMut(&[i64])>(&self, mut f: F) {
        let d = self.shape.len();
        let mut p = vec![0i64; d];
        for (wi, &w) in self.words.iter().enumerate() {
            let mut bits = w;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let mut idx = (wi * 64 + b) as i64;
                for i in (0..d).rev() {
                    p[i] = self.lo[i] + idx % self.shape[i];
                    idx /= self.shape[i];
                }
                f(&p);
            }
        }
    }
}

/// Splits flat lattice points into (parent at `bits` coarser, local offset)
/// and groups parents by their local pattern.
fn group_by_parent(flat: &[i64], d: usize, bits: u32) -> Vec<(Vec<i64>, Vec<i64>)> {
    let mask = (1i64 << bits) - 1;
    let n = flat.len() / d;
    let mut order: Vec<usize> = (0..n).collect();
    let key = |i: usize, t: usize| flat[i * d + t] >> bits;
    order.sort_by(|&a, &b| (0..d).map(|t| key(a, t)).cmp((0..d).map(|t| key(b, t))).then(flat[a * d..a * d + d].cmp(&flat[b * d..b * d + d])));
    // local pattern -> parents
    let mut types: HashMap<Vec<i64>, Vec<i64>> = HashMap::new();
    let mut type_order: Vec<Vec<i64>> = Vec::new();
    let mut i = 0;
    while i < n {
        let parent: Vec<i64> = (0..d).map(|t| key(order[i], t)).collect();
        let mut local = Vec::new();
        while i < n && (0..d).all(|t| key(order[i], t) == parent[t]) {
            local.extend((0..d).map(|t| flat[order[i] * d + t] & mask));
            i += 1;
        }
        let entry = types.entry(local.clone()).or_default();
        if entry.is_empty() {
            type_order.push(local);
        }
        entry.extend(parent);
    }
    type_order
        .into_iter()
        .map(|l| {
            let parents = types.remove(&l).unwrap();
            (parents, l)
        })
        .collect()
}

/// Pixels of `[0, 2^m)^d` covered by `A + B`, where both are flat integer
/// lists at the same lattice level `m`. Sums are formed parent-by-parent:
/// `a + b = 2^bits (P_a + P_b) + (l_a + l_b)`.
fn pixel_coverage(a: &[i64], b: &[i64], d: usize, m: u32, bits: u32) -> Result<Raster> {
    let n = 1i64 << m;
    let window = Raster::new(vec![0; d], vec![n; d]);
    let mut out = window;
    if bits == 0 || bits > m {
        // direct sums
        for p in a.chunks(d) {
            for q in b.chunks(d) {
                let s: Vec<i64> = p.iter().zip(q).map(|(x, y)| x + y).collect();
                out.set(&s);
            }
        }
        return Ok(out);
    }
    let ga = group_by_parent(a, d, bits);
    let gb = group_by_parent(b, d, bits);
    let f = 1i64 << bits;
    let coarse_n = n >> bits;
    let mut coarse = Raster::new(vec![-2; d], vec![coarse_n + 3; d]);
    let mut locals = Raster::new(vec![0; d], vec![2 * f - 1; d]);
    let mut pix = vec![0i64; d];
    for (pa, la) in &ga {
        for (pb, lb) in &gb {
            coarse.clear();
            for x in pa.chunks(d) {
                for y in pb.chunks(d) {
                    for t in 0..d {
                        pix[t] = x[t] + y[t];
                    }
                    coarse.set(&pix);
                }
            }
            locals.clear();
            for x in la.chunks(d) {
                for y in lb.chunks(d) {
                    for t in 0..d {
                        pix[t] = x[t] + y[t];
                    }
                    locals.set(&pix);
                }
            }
            let mut ls: Vec<i64> = Vec::new();
            locals.for_each_set(|l| ls.extend_from_slice(l));
            let mut cell = vec![0i64; d];
            coarse.for_each_set(|c| {
                for l in ls.chunks(d) {
                    for t in 0..d {
                        cell[t] = c[t] * f + l[t];
                    }
                    out.set(&cell);
                }
            });
        }
    }
    Ok(out)
}

/// Pixels of `cur` that are empty while their parent pixel in `prev`, one
/// level of `bits` coarser, is set.
fn lost_pixels(prev: &Raster, cur: &Raster, bits: u32) -> u128 {
    let d = cur.shape.len();
    let total: i64 = cur.shape.iter().product();
    let mut p = vec![0i64; d];
    let mut lost = 0u128;
    for idx in 0..total {
        let i = idx as usize;
        if cur.words[i / 64] >> (i % 64) & 1 == 1 {
            continue;
        }
        let mut r = idx;
        for t in (0..d).rev() {
            p[t] = (cur.lo[t] + r % cur.shape[t]) >> bits;
            r /= cur.shape[t];
        }
        if prev.get(&p) {
            lost += 1;
        }
    }
    lost
}

/// Brute-force version of `pixel_coverage`, returning the uncovered count.
pub fn uncovered_pixels_direct(a: &[i64], b: &[i64], d: usize, m: u32) -> u128 {
    let r = pixel_coverage(a, b, d, m, 0).expect("direct coverage");
    (1u128 << (m as usize * d)) - r.count()
}

/// Same count via the parent grouping with `bits` local bits.
pub fn uncovered_pixels_grouped(a: &[i64], b: &[i64], d: usize, m: u32, bits: u32) -> Result<u128> {
    Ok((1u128 << (m as usize * d)) - pixel_coverage(a, b, d, m, bits)?.count())
}

fn check(name: &str, holds: bool, detail: String) -> InvariantCheck {
    InvariantCheck {
        name: name.into(),
        holds,
        detail,
    }
}

/// `|B''|` for cubes of side 1 at level `m`, in units of `2^{-(m+1) d}`.
fn inflated_volume(cells: &[i64], d: usize, m: u32) -> Result<u128> {
    let boxes: Vec<LatticeBox> = cells
        .chunks(d)
        .map(|c| LatticeBox {
            lo: c.iter().map(|x| 2 * x - 5).collect(),
            hi: c.iter().map(|x| 2 * x + 7).collect(),
        })
        .collect();
    Ok(ElementarySet::from_boxes(d, m + 1, &boxes)?.volume_units())
}

/// Every `6Q'` for `Q'` in `fine` lies in a single `6Q` for `Q` in `coarse`;
/// `coarse` is sorted flat, levels differ by `bits`.
fn nested_6q(coarse: &[i64], fine: &[i64], d: usize, bits: u32) -> Option<Vec<i64>> {
    let f = 1i64 << bits;
    let sorted: Vec<&[i64]> = coarse.chunks(d).collect();
    for c in fine.chunks(d) {
        // 2 f s - 5 f <= 2 c - 5 and 2 c + 7 <= 2 f s + 7 f, in half units
        let lo: Vec<i64> = c.iter().map(|&x| (2 * x + 7 - 7 * f).div_euclid(2 * f) + ((2 * x + 7 - 7 * f).rem_euclid(2 * f) != 0) as i64).collect();
        let hi: Vec<i64> = c.iter().map(|&x| (2 * x - 5 + 5 * f).div_euclid(2 * f)).collect();
        if (0..d).any(|t| lo[t] > hi[t]) {
            return Some(c.to_vec());
        }
        let span: Vec<usize> = (0..d).map(|t| (hi[t] - lo[t] + 1) as usize).collect();
        let mut found = false;
        crate::geometry::for_each_in_range(&vec![0; d], &span, |o| {
            if !found {
                let s: Vec<i64> = (0..d).map(|t| lo[t] + o[t] as i64).collect();
                found = sorted.binary_search(&s.as_slice()).is_ok();
            }
        });
        if !found {
            return Some(c.to_vec());
        }
    }
    None
}

struct Stage {
    cells: Vec<i64>,
    a_prime: Vec<i64>,
    coverage: Raster,
}

fn representatives(points: &[i64], d: usize, k: u32, parents: &BTreeSet<Vec<i64>>, parent_level: u32, level: u32) -> Result<Vec<i64>> {
    let up = k - parent_level;
    let cell = k - level;
    let mut chosen: Vec<(Vec<i64>, &[i64])> = points
        .chunks(d)
        .filter(|p| parents.contains(&p.iter().map(|x| x >> up).collect::<Vec<_>>()))
        .map(|p| (p.iter().map(|x| x >> cell).collect(), p))
        .collect();
    chosen.sort();
    chosen.dedup_by(|a, b| a.0 == b.0);
    let mut out = Vec::with_capacity(chosen.len() * d);
    for (_, p) in chosen {
        if p.iter().any(|x| x & ((1 << cell) - 1) != 0) {
            return Err(Error::Domain(format!(
                "representative {p:?} is off the level-{level} grid; the test set must contain the lower corner of each occupied cell"
            )));
        }
        out.extend(p.iter().map(|x| x >> cell));
    }
    Ok(out)
}

/// Runs the full-measure construction to depth `J` and checks every stage.
pub fn full_measure_run(config: &FullMeasureConfig) -> Result<FullMeasureTrace> {
    let d = config.d;
    if *config.eps.numer() == 0 || config.eps > Rational::new(1, 1) {
        return Err(Error::Domain(format!("eps = {} must lie in (0, 1]", config.eps)));
    }
    let design = PatchDesign::new(config.patch_eta, d, config.patch_rule, config.field_cap)?;
    let bits = 1 + design.axis_bits;
    let top = bits * config.depth;
    if 1u128.checked_shl(top * d as u32).is_none_or(|p| p > config.pixel_budget) {
        return Err(Error::BudgetExceeded {
            step: config.depth as usize,
            required: 1u128.checked_shl(top * d as u32).unwrap_or(u128::MAX),
            budget: config.pixel_budget,
        });
    }
    let raw = generate_cantor(d, &config.generator, config.generator_depth)?.to_dyadic()?;
    if raw.k < top {
        return Err(Error::Domain(format!("test set resolution 2^-{} is coarser than the final level 2^-{top}", raw.k)));
    }
    let (a_cert, _n_ks, certificate) = uniform_large_subset(&raw, &config.gauge, config.eta, &config.schedule)?;
    if !certificate.pass {
        return Err(Error::Invariant {
            invariant: "uniform largeness".into(),
            step: 0,
            detail: "certificate does not hold on the test set".into(),
        });
    }
    let k = a_cert.k;
    let points: Vec<i64> = a_cert.cells.iter().flat_map(|c| c.iter().map(|&x| x as i64)).collect();
    let a0: Vec<i64> = points[..d].to_vec();
    if a0.iter().any(|&x| x != 0) {
        return Err(Error::Domain(format!("the smallest point {a0:?} must be the origin so that A'_0 sits on the level-0 grid")));
    }
    let eps_f = *config.eps.numer() as f64 / *config.eps.denom() as f64;

    // level 0
    let b0: Vec<i64> = cube_offsets(d, &[-1, 0]).concat();
    let mut levels = Vec::new();
    let cov0 = pixel_coverage(&vec![0; d], &b0, d, 0, 0)?;
    let unc0 = 1 - cov0.count();
    levels.push(FullMeasureLevel {
        j: 0,
        exponent: 0,
        cell_count: b0.len() / d,
        cells: Some(b0.clone()),
        cells_sha256: digest(&b0),
        a_prime_size: 1,
        a_prime_sha256: digest(&vec![0; d]),
        uncovered_pixels: unc0,
        total_pixels: 1,
        lost_pixels: 0,
        inflated_volume_units: inflated_volume(&b0, d, 0)?,
        largeness: None,
        checks: vec![
            check("init", true, "B_0 = [-1,1]^d, A'_0 = {a_0}".into()),
            check("d", unc0 == 0, format!("uncovered {unc0} of 1 pixels <= 0")),
        ],
    });
    let mut stage = Stage {
        cells: b0,
        a_prime: vec![0; d],
        coverage: cov0,
    };

    for j in 0..config.depth {
        let m = bits * j;
        let m_next = m + bits;
        let eps_step = eps_f * (-((j + 1) as f64)).exp2();
        // A'_{j+1}: one point per level-(m_next) cell inside the level-m cubes of A'_j
        let parents: BTreeSet<Vec<i64>> = stage.a_prime.chunks(d).map(|p| p.to_vec()).collect();
        let a_next = representatives(&points, d, k, &parents, m, m_next)?;
        let mut per_parent: HashMap<Vec<i64>, usize> = HashMap::new();
        for p in a_next.chunks(d) {
            *per_parent.entry(p.iter().map(|x| x >> bits).collect()).or_default() += 1;
        }
        let min_count = parents.iter().map(|p| per_parent.get(p).copied().unwrap_or(0)).min().unwrap_or(0);
        let n_prime = crate::large_sumset::patch_threshold(config.patch_eta, eps_step, d);
        let largeness = ThresholdCheck::at_least(format!("step {j}: min |A ∩ R_0|_delta >= N'"), min_count as f64, n_prime);
        config.policy.apply(&largeness)?;

        // B_{j+1}: one patch per cube of B_j
        let mut cells: Vec<i64> = Vec::new();
        let mut within_4q = true;
        let mut measure_ok = true;
        for c in stage.cells.chunks(d) {
            let q = LatticeBox::cube(c.to_vec(), 1);
            let patch = continuous_patch_complement(&q, m, m_next, &design, eps_step, min_count as f64)?;
            within_4q &= patch.within_4q;
            measure_ok &= patch.measure_ok;
            cells.extend_from_slice(patch.set.corners_flat().chunks(2 * d).flat_map(|b| &b[..d]).copied().collect::<Vec<_>>().as_slice());
        }
        let mut sorted: Vec<&[i64]> = cells.chunks(d).collect();
        sorted.sort();
        sorted.dedup();
        let cells: Vec<i64> = sorted.concat();
        let count = cells.len() / d;

        let coverage = pixel_coverage(&a_next, &cells, d, m_next, bits)?;
        let total = 1u128 << (m_next as usize * d);
        let uncovered = total - coverage.count();
        let lost = lost_pixels(&stage.coverage, &coverage, bits);
        let inflated = inflated_volume(&cells, d, m_next)?;
        let nest = nested_6q(&stage.cells, &cells, d, bits);
        let (num, den) = (*config.eps.numer() as u128, *config.eps.denom() as u128);
        let jj = j + 1;
        let checks = vec![
            check("a", true, format!("B_{jj} is a union of {count} cubes of side 2^-{m_next}")),
            check("b", within_4q, format!("B_{jj} ⊂ union of 4Q over the cubes of B_{j}")),
            check("c", count as u128 * (1 << jj) <= 1u128 << (m_next as usize * d), format!("|B_{jj}| = {count} 2^-{} <= 2^-{jj}", m_next as usize * d)),
            check(
                "d",
                (uncovered * den) << jj <= ((1u128 << jj) - 1) * num * total,
                format!("uncovered {uncovered} of {total} pixels <= (1 - 2^-{jj}) eps"),
            ),
            check(
                "telescoping",
                (lost * den) << jj <= num * total,
                format!("{lost} pixels lost at step {jj} <= 2^-{jj} eps"),
            ),
            check("patch-measure", measure_ok, format!("every patch <= {} |Q|", config.patch_eta)),
            check(
                "nesting-6q",
                nest.is_none(),
                match &nest {
                    None => format!("each 6Q' of B_{jj} inside one 6Q of B_{j}"),
                    Some(c) => format!("6Q' at {c:?} escapes"),
                },
            ),
            check(
                "6q-volume",
                inflated <= (6u128.pow(d as u32) * (count as u128)) << d,
                format!("|B''_{jj}| <= 6^d |B_{jj}|"),
            ),
        ];
        levels.push(FullMeasureLevel {
            j: jj,
            exponent: m_next,
            cell_count: count,
            cells: (count <= INLINE_CELLS).then(|| cells.clone()),
            cells_sha256: digest(&cells),
            a_prime_size: a_next.len() / d,
            a_prime_sha256: digest(&a_next),
            uncovered_pixels: uncovered,
            total_pixels: total,
            lost_pixels: lost,
            inflated_volume_units: inflated,
            largeness: Some(largeness),
            checks,
        });
        stage = Stage {
            cells,
            a_prime: a_next,
            coverage,
        };
    }
    let pass = levels.iter().all(|l| l.checks.iter().all(|c| c.holds));
    Ok(FullMeasureTrace {
        schema: SCHEMA.into(),
        config: config.clone(),
        patch_k: design.k,
        patch_m: design.m,
        patch_cells: design.cell_count(),
        certificate,
        levels,
        pass,
    })
}

/// Failed checks of a stored trace: inline cell lists must match their
/// digests and counts, and a rerun from the stored configuration must
/// reproduce every level.
pub fn verify_full_measure(trace: &FullMeasureTrace) -> Result<Vec<String>> {
    let mut problems = Vec::new();
    let d = trace.config.d;
    for l in &trace.levels {
        if let Some(cells) = &l.cells {
            if digest(cells) != l.cells_sha256 || cells.len() != l.cell_count * d {
                problems.push(format!("level {}: stored cells do not match digest or count", l.j));
            }
            if l.j > 0 && inflated_volume(cells, d, l.exponent)? != l.inflated_volume_units {
                problems.push(format!("level {}: |B''| differs from the stored cells", l.j));
            }
        }
        for c in l.checks.iter().filter(|c| !c.holds) {
            problems.push(format!("level {}: check {} failed: {}", l.j, c.name, c.detail));
        }
    }
    let rerun = full_measure_run(&trace.config)?;
    if rerun.levels.len() != trace.levels.len() {
        problems.push("rerun depth differs".into());
    }
    for (a, b) in rerun.levels.iter().zip(&trace.levels) {
        if a != b {
            problems.push(format!("level {} differs from the rerun", b.j));
        }
    }
    if rerun.certificate != trace.certificate {
        problems.push("largeness certificate differs from the rerun".into());
    }
    Ok(problems)
}
