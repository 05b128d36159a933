//! The recursive-rectangles construction for a function family.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_with::DisplayFromStr;

use super::family::{family_covering_number, FunctionFamily};
use super::InvariantCheck;
use crate::covering::{anchored_cover_complement, Ambient, CoverOptions, SetFamily};
use crate::error::{Error, Result};
use crate::fractal::grid_count_points;
use crate::geometry::{sumset_coverage, ElementarySet, LatticeBox, PointSet};
use crate::threshold::{ThresholdCheck, ThresholdPolicy};
use crate::{Rational, SCHEMA};

/// The function `N(delta)` a test set is known to be large for.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LargenessFunction {
    /// `scale * ln^power(1/delta)`
    LogPower { power: f64, scale: f64 },
    /// `scale * delta^{-alpha}`
    Power { alpha: f64, scale: f64 },
}

impl LargenessFunction {
    pub fn eval(&self, delta: f64) -> f64 {
        match *self {
            LargenessFunction::LogPower { power, scale } => scale * (1.0 / delta).ln().powf(power),
            LargenessFunction::Power { alpha, scale } => scale * delta.powf(-alpha),
        }
    }
}

/// Everything a single step needs besides the cube and anchor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RrpContext {
    pub points: PointSet,
    pub family: FunctionFamily,
    pub largeness: LargenessFunction,
    /// Available `delta = 2^{-e}`, coarse to fine.
    pub scales: Vec<u32>,
}

impl RrpContext {
    pub fn new(points: PointSet, family: FunctionFamily, largeness: LargenessFunction, mut scales: Vec<u32>) -> Result<Self> {
        family.validate()?;
        if points.is_empty() {
            return Err(Error::EmptySet("point set"));
        }
        if points.d() != family.d {
            return Err(Error::Malformed("points and family differ in dimension".into()));
        }
        let one = 1i64 << points.exponent();
        if points.flat().iter().any(|&x| x < 0 || x > one) {
            return Err(Error::Domain("points must lie in [0,1]^d".into()));
        }
        scales.sort_unstable();
        scales.dedup();
        if scales.is_empty() {
            return Err(Error::EmptySet("scale profile"));
        }
        Ok(Self {
            points,
            family,
            largeness,
            scales,
        })
    }

    /// Lattice exponent of cubes, complements and images.
    pub fn working_exponent(&self) -> u32 {
        self.family.image_exponent(self.points.exponent())
    }

    fn images(&self, a: &PointSet) -> Result<Vec<PointSet>> {
        let w = self.working_exponent();
        (0..self.family.len()).map(|i| self.family.image(i, a, w)).collect()
    }
}

#[serde_with::serde_as]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RrpStepRecord {
    pub q: LatticeBox,
    pub anchor: Vec<i64>,
    pub eps: Rational,
    pub seed: u64,
    /// `|A ∩ (a + P°)|` as points
    pub local_points: usize,
    pub delta_exponent: u32,
    /// `delta' = delta / C`
    pub net_exponent: u32,
    /// `|A ∩ (a + P°)|_delta >= N(delta)`
    pub largeness: ThresholdCheck,
    /// `N(delta) > (108^d/eps) ln(delta'^{-1} M(delta'))`
    pub limit: ThresholdCheck,
    /// `|F|_{delta'} <= M(delta')`
    pub covering_bound_ok: bool,
    /// Exponents tried before this one succeeded.
    pub tried: Vec<u32>,
    pub a_prime_size: usize,
    #[serde_as(as = "DisplayFromStr")]
    pub t_volume_units: u128,
    pub measure_ok: bool,
    pub within_2q: bool,
    pub within_3q: bool,
    /// One per map: `f(a) + Q ⊂ f(A') + T`
    pub coverage: Vec<bool>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RrpStep {
    pub a_prime: PointSet,
    pub t: ElementarySet,
    pub record: RrpStepRecord,
}

struct Candidate {
    e: u32,
    net: u32,
    largeness: ThresholdCheck,
    limit: ThresholdCheck,
    covering_bound_ok: bool,
}

fn candidates(ctx: &RrpContext, local: &PointSet, t: u32, eps: Rational) -> Result<Vec<Candidate>> {
    let w = ctx.working_exponent();
    let c = ctx.family.lipschitz_log2;
    let d = ctx.family.d as i32;
    let eps_f = *eps.numer() as f64 / *eps.denom() as f64;
    let mut out = Vec::new();
    for &e in &ctx.scales {
        let net = e + c;
        if e > local.exponent() || net > w || net + t < w + 2 {
            continue;
        }
        let delta = (-(e as f64)).exp2();
        let delta_net = (-(net as f64)).exp2();
        let n = ctx.largeness.eval(delta);
        let count = grid_count_points(local, e)? as f64;
        let m = ctx.family.covering_bound.eval(delta_net);
        let required = 108f64.powi(d) / eps_f * (m / delta_net).ln();
        out.push(Candidate {
            e,
            net,
            largeness: ThresholdCheck::at_least("|A ∩ (a+P°)|_delta >= N(delta)", count, n),
            limit: ThresholdCheck::new("N(delta) > (108^d/eps) ln(M(delta')/delta')", n, required),
            covering_bound_ok: family_covering_number(&ctx.family, delta_net)? as f64 <= m,
        });
    }
    Ok(out)
}

/// One application of the recursive-rectangles property: for the cube `q`
/// (at the working exponent) and the anchor `anchor` in `A`, returns `A'`
/// and `T` with `f(a) + Q ⊂ f(A') + T` for every map, `T ⊂ 2Q` and
/// `|T| <= eps |Q|`.
///
/// The scale is the coarsest admissible one in the profile. Under
/// `ReportOnly` inadmissible scales are tried coarse to fine until the exact
/// verification passes.
pub fn rrp_step(ctx: &RrpContext, q: &LatticeBox, anchor: &[i64], eps: Rational, opts: CoverOptions) -> Result<RrpStep> {
    let w = ctx.working_exponent();
    let wa = ctx.points.exponent();
    let d = ctx.family.d;
    if !ctx.points.contains(anchor) {
        return Err(Error::Malformed(format!("anchor {anchor:?} is not in A")));
    }
    let side = q.hi[0] - q.lo[0];
    if q.d() != d || (0..d).any(|i| q.hi[i] - q.lo[i] != side) || side < 2 || side & (side - 1) != 0 {
        return Err(Error::Malformed(format!("{q:?} is not a cube of power-of-two side")));
    }
    let t = side.trailing_zeros();
    let c = ctx.family.lipschitz_log2;
    // half the side of P, in units of A's lattice
    if t < (w - wa) + c + 1 {
        return Err(Error::Domain(format!("cube side 2^{t} at exponent {w} is below the resolution of A")));
    }
    let half_p = 1i64 << (t - (w - wa) - c - 1);
    let local = ctx
        .points
        .filter(|x| x.iter().zip(anchor).all(|(xi, ai)| (xi - ai).abs() < half_p));

    let cands = candidates(ctx, &local, t, eps)?;
    if cands.is_empty() {
        return Err(Error::Domain(format!("no profile scale fits a cube of side 2^{t} at exponent {w}")));
    }
    let admissible: Vec<&Candidate> = cands.iter().filter(|k| k.largeness.satisfied && k.limit.satisfied).collect();
    let order: Vec<&Candidate> = match (admissible.first(), opts.policy) {
        (Some(k), _) => vec![*k],
        (None, ThresholdPolicy::ReportOnly) => cands.iter().collect(),
        (None, ThresholdPolicy::Enforce) => {
            let worst = cands
                .iter()
                .map(|k| if k.largeness.satisfied { &k.limit } else { &k.largeness })
                .max_by(|a, b| a.margin().total_cmp(&b.margin()))
                .unwrap();
            return Err(Error::Threshold {
                what: worst.what.clone(),
                measured: worst.measured,
                required: worst.required,
            });
        }
    };

    let mut tried = Vec::new();
    let mut last_err = None;
    for k in order {
        match step_at(ctx, &local, q, anchor, eps, k, opts) {
            Ok(mut s) if s.record.pass => {
                s.record.tried = tried;
                return Ok(s);
            }
            Ok(s) => {
                last_err = Some(Error::Invariant {
                    invariant: "rrp-step".into(),
                    step: 0,
                    detail: format!("complement at delta = 2^-{} fails verification: {:?}", k.e, s.record),
                })
            }
            Err(e) => last_err = Some(e),
        }
        tried.push(k.e);
    }
    Err(last_err.expect("at least one scale was tried"))
}

fn step_at(
    ctx: &RrpContext,
    local: &PointSet,
    q: &LatticeBox,
    anchor: &[i64],
    eps: Rational,
    k: &Candidate,
    opts: CoverOptions,
) -> Result<RrpStep> {
    let w = ctx.working_exponent();
    let d = ctx.family.d;
    // one representative per delta-cell, plus the anchor
    let sh = local.exponent() - k.e;
    let mut reps: Vec<Vec<i64>> = Vec::new();
    let mut last: Option<Vec<i64>> = None;
    let mut by_cell: Vec<(Vec<i64>, Vec<i64>)> = local
        .iter()
        .map(|p| (p.iter().map(|x| x >> sh).collect(), p.to_vec()))
        .collect();
    by_cell.sort();
    for (cell, p) in by_cell {
        if last.as_ref() != Some(&cell) {
            reps.push(p);
            last = Some(cell);
        }
    }
    reps.push(anchor.to_vec());
    let a_prime = PointSet::new(d, local.exponent(), reps)?;

    let members = ctx.images(&a_prime)?;
    let anchor_set = PointSet::new(d, a_prime.exponent(), vec![anchor.to_vec()])?;
    let anchors: Vec<Vec<i64>> = ctx.images(&anchor_set)?.iter().map(|s| s.point(0).to_vec()).collect();
    let mut lo = vec![i64::MAX; d];
    let mut hi = vec![i64::MIN; d];
    for m in &members {
        for p in m.iter() {
            for i in 0..d {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i] + 1);
            }
        }
    }
    let family = SetFamily {
        ambient: Ambient::Cube {
            cube: LatticeBox::new(lo, hi)?,
            exponent: w,
        },
        members,
        anchors: Some(anchors),
    };
    let cover = anchored_cover_complement(&family, q, eps, k.net, opts)?;
    let cert = &cover.certificate;
    let coverage: Vec<bool> = cert.coverage.iter().map(|c| c.complete()).collect();
    let pass = cert.pass && a_prime.contains(anchor);
    Ok(RrpStep {
        record: RrpStepRecord {
            q: q.clone(),
            anchor: anchor.to_vec(),
            eps,
            seed: opts.seed,
            local_points: local.len(),
            delta_exponent: k.e,
            net_exponent: k.net,
            largeness: k.largeness.clone(),
            limit: k.limit.clone(),
            covering_bound_ok: k.covering_bound_ok,
            tried: Vec::new(),
            a_prime_size: a_prime.len(),
            t_volume_units: cover.set.volume_units(),
            measure_ok: cert.measure_ok,
            within_2q: cert.within_2q,
            within_3q: cert.within_3q,
            coverage,
            pass,
        },
        a_prime,
        t: cover.set,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RrpConfig {
    pub context: RrpContext,
    pub depth: u32,
    /// `K_0 = R` is split into cubes of side at most `2^{-initial_exponent}`.
    pub initial_exponent: u32,
    pub seed: u64,
    pub policy: ThresholdPolicy,
    pub max_draws: u32,
    /// Cap on `(#cubes) * |A'_j|` step calls per level.
    pub call_budget: u64,
}

#[serde_with::serde_as]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RrpLevel {
    pub j: u32,
    /// `K_j` is split into cubes of side `delta_j = 2^{-split_exponent}`.
    pub split_exponent: u32,
    pub k_set: ElementarySet,
    #[serde_as(as = "DisplayFromStr")]
    pub k_volume_units: u128,
    pub a_prime: PointSet,
    /// Step calls that produced this level (empty at `j = 0`).
    pub calls: Vec<RrpStepRecord>,
    pub checks: Vec<InvariantCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RrpTrace {
    pub schema: String,
    pub config: RrpConfig,
    pub working_exponent: u32,
    pub a0: Vec<i64>,
    /// Smallest box with `[0,1]^d ⊂ f(a_0) + hull` for every map.
    pub hull: LatticeBox,
    /// `hull` snapped outward to the initial grid.
    pub r: LatticeBox,
    pub levels: Vec<RrpLevel>,
    pub pass: bool,
}

/// Finest dyadic level on which every corner of `k` lies, at most `w`.
fn grid_level(k: &ElementarySet, w: u32) -> u32 {
    let tz = k.corners_flat().iter().filter(|&&x| x != 0).map(|x| x.trailing_zeros()).min().unwrap_or(w);
    w - tz.min(w)
}

fn split_cubes(k: &ElementarySet, side: i64) -> Vec<LatticeBox> {
    let mut cubes = Vec::new();
    for b in k.boxes() {
        let d = b.d();
        let counts: Vec<usize> = (0..d).map(|i| ((b.hi[i] - b.lo[i]) / side) as usize).collect();
        crate::geometry::for_each_in_range(&vec![0; d], &counts, |idx| {
            cubes.push(LatticeBox::cube((0..d).map(|i| b.lo[i] + idx[i] as i64 * side).collect(), side));
        });
    }
    cubes.sort();
    cubes
}

fn neighbourhood(k: &ElementarySet, r: i64) -> Result<ElementarySet> {
    let boxes: Vec<LatticeBox> = k
        .boxes()
        .map(|b| LatticeBox {
            lo: b.lo.iter().map(|x| x - r).collect(),
            hi: b.hi.iter().map(|x| x + r).collect(),
        })
        .collect();
    ElementarySet::from_boxes(k.d(), k.exponent(), &boxes)
}

fn check(name: &str, holds: bool, detail: String) -> InvariantCheck {
    InvariantCheck {
        name: name.into(),
        holds,
        detail,
    }
}

/// Invariant (c): `f(a_0) + R ⊂ f(A'_j) + K_j` for every map.
fn coverage_check(ctx: &RrpContext, a0: &[i64], r: &LatticeBox, a_prime: &PointSet, k: &ElementarySet) -> Result<InvariantCheck> {
    let w = ctx.working_exponent();
    let a0_set = PointSet::new(ctx.family.d, ctx.points.exponent(), vec![a0.to_vec()])?;
    let imgs = ctx.images(a_prime)?;
    let a0_imgs = ctx.images(&a0_set)?;
    let mut failing = Vec::new();
    for (i, (img, f_a0)) in imgs.iter().zip(&a0_imgs).enumerate() {
        let target = r.translated(f_a0.point(0));
        let (_, cov) = sumset_coverage(img, k, &target, w)?;
        if !cov.complete() {
            failing.push(format!("f={i}: {} of {} cells uncovered", cov.uncovered_cells, cov.total_cells));
        }
    }
    Ok(check(
        "c",
        failing.is_empty(),
        if failing.is_empty() {
            format!("f(a0)+R covered for all {} maps", imgs.len())
        } else {
            failing.join("; ")
        },
    ))
}

fn volume_at_most(v: u128, w: u32, d: usize, num: u128, den: u128) -> bool {
    v * den <= num << (w as usize * d)
}

/// Checks of one level from the stored sets alone.
fn level_checks(trace_ctx: &RrpContext, a0: &[i64], hull: &LatticeBox, r: &LatticeBox, prev: Option<&RrpLevel>, level: &RrpLevel) -> Result<Vec<InvariantCheck>> {
    let w = trace_ctx.working_exponent();
    let d = trace_ctx.family.d;
    let k = &level.k_set;
    let j = level.j;
    let mut out = Vec::new();
    out.push(check(
        "volume",
        k.volume_units() == level.k_volume_units && k.is_non_overlapping()?,
        format!("stored {} units, recomputed {}", level.k_volume_units, k.volume_units()),
    ));
    let level_ok = grid_level(k, w) <= level.split_exponent && level.split_exponent >= j && level.split_exponent <= w;
    out.push(check(
        "split",
        level_ok,
        format!("delta_{j} = 2^-{}, K_{j} on level {}", level.split_exponent, grid_level(k, w)),
    ));
    match prev {
        None => {
            let mut ok = *k == ElementarySet::from_box(w, r.clone()) && level.a_prime == PointSet::new(d, trace_ctx.points.exponent(), vec![a0.to_vec()])?;
            let a0_set = PointSet::new(d, trace_ctx.points.exponent(), vec![a0.to_vec()])?;
            for img in trace_ctx.images(&a0_set)? {
                let p = img.point(0);
                ok &= (0..d).all(|i| p[i] + hull.lo[i] <= 0 && p[i] + hull.hi[i] >= 1i64 << w);
            }
            ok &= r.contains_box(hull);
            out.push(check("init", ok, "K_0 = R, A'_0 = {a_0}, [0,1]^d ⊂ f(a_0) + R".into()));
        }
        Some(p) => {
            let side = 1i64 << (w - p.split_exponent);
            let nb = neighbourhood(&p.k_set, side)?;
            let joined = nb.union(k)?;
            out.push(check(
                "a",
                joined.volume_units() == nb.volume_units(),
                format!("K_{j} ⊂ K_{}^(delta) with delta = 2^-{}", j - 1, p.split_exponent),
            ));
            let five_d = 5u128.pow(d as u32);
            out.push(check(
                "b",
                volume_at_most(k.volume_units(), w, d, 1, five_d << j),
                format!("|K_{j}| = {} <= 5^-d 2^-{j}", k.volume()),
            ));
            let nb2 = neighbourhood(k, 2 << (w - level.split_exponent))?;
            out.push(check(
                "b-neighbourhood",
                volume_at_most(nb2.volume_units(), w, d, 1, 1 << j),
                format!("|K_{j}^(2 delta_{j})| = {} <= 2^-{j}", nb2.volume()),
            ));
            out.push(check(
                "b-5q",
                nb2.volume_units() <= five_d * k.volume_units(),
                format!("|K_{j}^(2 delta_{j})| <= 5^d |K_{j}|"),
            ));
            out.push(check(
                "halving",
                2 * k.volume_units() <= p.k_volume_units,
                format!("|K_{j}| <= |K_{}| / 2", j - 1),
            ));
            let calls_ok = level.calls.iter().all(|c| c.measure_ok && c.within_2q && c.within_3q && c.pass);
            out.push(check(
                "steps",
                calls_ok && !level.calls.is_empty(),
                format!("{} step calls with T ⊂ 2Q ⊂ 3Q and |T| <= |Q|/(2 5^d |A'|)", level.calls.len()),
            ));
        }
    }
    out.push(coverage_check(trace_ctx, a0, r, &level.a_prime, k)?);
    Ok(out)
}

/// `Delta_j = sum_{l >= j} delta_l <= 2 delta_j` on the realized schedule.
fn tail_checks(levels: &[RrpLevel]) -> Vec<InvariantCheck> {
    let exps: Vec<u32> = levels.iter().map(|l| l.split_exponent).collect();
    let top = exps.iter().copied().max().unwrap_or(0);
    (0..levels.len())
        .map(|j| {
            let tail: u128 = exps[j..].iter().map(|&e| 1u128 << (top - e)).sum();
            let ok = tail <= 2u128 << (top - exps[j]);
            check("tail", ok, format!("Delta_{j} <= 2 delta_{j}"))
        })
        .collect()
}

fn initial(config: &RrpConfig) -> Result<(u32, Vec<i64>, LatticeBox, LatticeBox)> {
    let ctx = &config.context;
    let w = ctx.working_exponent();
    let d = ctx.family.d;
    if config.initial_exponent > w {
        return Err(Error::Domain("initial split finer than the working lattice".into()));
    }
    let a0 = ctx.points.point(0).to_vec();
    let a0_set = PointSet::new(d, ctx.points.exponent(), vec![a0.clone()])?;
    let imgs = ctx.images(&a0_set)?;
    let one = 1i64 << w;
    let lo: Vec<i64> = (0..d).map(|i| imgs.iter().map(|s| -s.point(0)[i]).min().unwrap()).collect();
    let hi: Vec<i64> = (0..d).map(|i| imgs.iter().map(|s| one - s.point(0)[i]).max().unwrap()).collect();
    let hull = LatticeBox::new(lo, hi)?;
    let step = 1i64 << (w - config.initial_exponent);
    let r = LatticeBox {
        lo: hull.lo.iter().map(|x| x.div_euclid(step) * step).collect(),
        hi: hull.hi.iter().map(|x| (x + step - 1).div_euclid(step) * step).collect(),
    };
    Ok((w, a0, hull, r))
}

fn fail_on(checks: &[InvariantCheck], j: u32) -> Result<()> {
    match checks.iter().find(|c| !c.holds) {
        None => Ok(()),
        Some(c) => Err(Error::Invariant {
            invariant: c.name.clone(),
            step: j as usize,
            detail: c.detail.clone(),
        }),
    }
}

/// Runs the construction to depth `J`, verifying the invariants at every
/// level; any failed invariant is an error naming the level.
pub fn rrp_run(config: &RrpConfig) -> Result<RrpTrace> {
    let ctx = &config.context;
    let d = ctx.family.d;
    let (w, a0, hull, r) = initial(config)?;
    let k0 = ElementarySet::from_box(w, r.clone());
    let mut levels = vec![RrpLevel {
        j: 0,
        split_exponent: config.initial_exponent.max(grid_level(&k0, w)),
        k_volume_units: k0.volume_units(),
        k_set: k0,
        a_prime: PointSet::new(d, ctx.points.exponent(), vec![a0.clone()])?,
        calls: Vec::new(),
        checks: Vec::new(),
    }];
    levels[0].checks = level_checks(ctx, &a0, &hull, &r, None, &levels[0])?;
    fail_on(&levels[0].checks, 0)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let five_d = 5u64.pow(d as u32);
    for j in 0..config.depth {
        let cur = &levels[j as usize];
        let side = 1i64 << (w - cur.split_exponent);
        let cubes = split_cubes(&cur.k_set, side);
        let calls = cubes.len() as u128 * cur.a_prime.len() as u128;
        if calls > config.call_budget as u128 {
            return Err(Error::BudgetExceeded {
                step: j as usize,
                required: calls,
                budget: config.call_budget as u128,
            });
        }
        let eps = Rational::new(1, 2 * five_d * cur.a_prime.len() as u64);
        let mut parts = Vec::with_capacity(calls as usize);
        let mut a_next = PointSet::empty(d, ctx.points.exponent());
        let mut records = Vec::with_capacity(calls as usize);
        for (s, q) in cubes.iter().enumerate() {
            for a in cur.a_prime.iter() {
                let opts = CoverOptions {
                    seed: rng.next_u64(),
                    policy: config.policy,
                    max_draws: config.max_draws,
                };
                let step = rrp_step(ctx, q, a, eps, opts).map_err(|e| Error::Invariant {
                    invariant: "rrp-step".into(),
                    step: j as usize,
                    detail: format!("s={s} (Q = {q:?}), a = {a:?}: {e}"),
                })?;
                a_next = a_next.union(&step.a_prime)?;
                parts.push(step.t);
                records.push(step.record);
            }
        }
        let k_next = ElementarySet::union_all(d, w, &parts)?;
        let mut level = RrpLevel {
            j: j + 1,
            split_exponent: (j + 1).max(grid_level(&k_next, w)),
            k_volume_units: k_next.volume_units(),
            k_set: k_next,
            a_prime: a_next,
            calls: records,
            checks: Vec::new(),
        };
        level.checks = level_checks(ctx, &a0, &hull, &r, Some(cur), &level)?;
        fail_on(&level.checks, j + 1)?;
        levels.push(level);
    }
    let tails = tail_checks(&levels);
    for (level, tail) in levels.iter_mut().zip(tails) {
        level.checks.push(tail);
    }
    for l in &levels {
        fail_on(&l.checks, l.j)?;
    }
    Ok(RrpTrace {
        schema: SCHEMA.into(),
        config: config.clone(),
        working_exponent: w,
        a0,
        hull,
        r,
        levels,
        pass: true,
    })
}

/// Recomputes every check of a stored trace from its sets and configuration.
/// Returns the recomputed checks per level; the trace verifies when they all
/// hold and agree with the stored ones.
pub fn verify_rrp(trace: &RrpTrace) -> Result<Vec<Vec<InvariantCheck>>> {
    let (w, a0, hull, r) = initial(&trace.config)?;
    if w != trace.working_exponent || a0 != trace.a0 || hull != trace.hull || r != trace.r {
        return Err(Error::Invariant {
            invariant: "init".into(),
            step: 0,
            detail: "stored a_0, hull or R differ from the configuration".into(),
        });
    }
    let mut out = Vec::new();
    for (i, level) in trace.levels.iter().enumerate() {
        if level.j as usize != i {
            return Err(Error::Malformed(format!("level {i} is labelled {}", level.j)));
        }
        let prev = if i == 0 { None } else { Some(&trace.levels[i - 1]) };
        out.push(level_checks(&trace.config.context, &a0, &hull, &r, prev, level)?);
    }
    for (checks, tail) in out.iter_mut().zip(tail_checks(&trace.levels)) {
        checks.push(tail);
    }
    Ok(out)
}
