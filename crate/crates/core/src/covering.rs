//! Covering complements: random complements in `Z_N^d`, their lift to signed
//! boxes, and the continuous versions built from δ-dyadic cubes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractal::{grid_count_points, hausdorff_distance_units};
use crate::geometry::{sumset_coverage, CoverageCount, ElementarySet, LatticeBox, PointSet};
use crate::group::{FiniteAbelianGroup, GroupSubset};
use crate::large_sumset::{cube_offsets, lift_to_signed_box, SignedBoxSet};
use crate::sumset::sumset;
use crate::threshold::{ThresholdCheck, ThresholdPolicy};
use crate::{Rational, SCHEMA};

/// Default bound on redraws of a random complement.
pub const DEFAULT_MAX_DRAWS: u32 = 1000;

/// `(2/eps) ln(|family| N^d)`
pub fn size_threshold(eps: f64, family_size: usize, n: u64, d: u32) -> f64 {
    2.0 / eps * ((family_size as f64).ln() + d as f64 * (n as f64).ln())
}

fn rational_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Ambient {
    /// `Z_N^d`, members given as points with coordinates in `[0, N)`.
    Grid { n: u64, d: usize },
    /// Members inside `cube`, all at lattice exponent `exponent`.
    Cube { cube: LatticeBox, exponent: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetFamily {
    pub ambient: Ambient,
    pub members: Vec<PointSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchors: Option<Vec<Vec<i64>>>,
}

impl SetFamily {
    pub fn grid(n: u64, d: usize, members: Vec<PointSet>) -> Result<Self> {
        let f = Self {
            ambient: Ambient::Grid { n, d },
            members,
            anchors: None,
        };
        f.validate()?;
        Ok(f)
    }

    /// Members inside `[0,1]^d` at lattice exponent `exponent`.
    pub fn unit_cube(d: usize, exponent: u32, members: Vec<PointSet>) -> Result<Self> {
        let cube = LatticeBox::cube(vec![0; d], 1i64 << exponent);
        let f = Self {
            ambient: Ambient::Cube { cube, exponent },
            members,
            anchors: None,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn with_anchors(mut self, anchors: Vec<Vec<i64>>) -> Result<Self> {
        self.anchors = Some(anchors);
        self.validate()?;
        Ok(self)
    }

    pub fn d(&self) -> usize {
        match &self.ambient {
            Ambient::Grid { d, .. } => *d,
            Ambient::Cube { cube, .. } => cube.d(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::EmptySet("family"));
        }
        for (i, a) in self.members.iter().enumerate() {
            if a.is_empty() {
                return Err(Error::Malformed(format!("member {i} is empty")));
            }
            let inside = match &self.ambient {
                Ambient::Grid { n, d } => a.d() == *d && a.exponent() == 0 && a.flat().iter().all(|&x| x >= 0 && (x as u64) < *n),
                Ambient::Cube { cube, exponent } => {
                    a.d() == cube.d() && a.exponent() == *exponent && a.iter().all(|p| cube.contains_point(p))
                }
            };
            if !inside {
                return Err(Error::Malformed(format!("member {i} leaves the ambient")));
            }
        }
        if let Some(anchors) = &self.anchors {
            if anchors.len() != self.members.len() {
                return Err(Error::Malformed("one anchor per member".into()));
            }
            for (i, (a, m)) in anchors.iter().zip(&self.members).enumerate() {
                if !m.contains(a) {
                    return Err(Error::Malformed(format!("anchor {i} is not in its member")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverOptions {
    pub seed: u64,
    pub policy: ThresholdPolicy,
    pub max_draws: u32,
}

impl CoverOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            policy: ThresholdPolicy::Enforce,
            max_draws: DEFAULT_MAX_DRAWS,
        }
    }

    pub fn report_only(mut self) -> Self {
        self.policy = ThresholdPolicy::ReportOnly;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomCoverCertificate {
    pub schema: String,
    pub n: u64,
    pub d: usize,
    pub eps: Rational,
    pub size: usize,
    pub family_size: usize,
    pub threshold: ThresholdCheck,
    pub draws: u32,
    pub seed: u64,
    /// `A + B = Z_N^d` for every member, checked exactly.
    pub verified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomCover {
    pub set: GroupSubset,
    pub certificate: RandomCoverCertificate,
}

fn grid_members(family: &SetFamily) -> Result<(u64, usize, FiniteAbelianGroup, Vec<GroupSubset>)> {
    let Ambient::Grid { n, d } = family.ambient else {
        return Err(Error::Domain("random complements need a grid family".into()));
    };
    family.validate()?;
    let g = FiniteAbelianGroup::power(n as usize, d)?;
    let members = family
        .members
        .iter()
        .map(|a| {
            let coords: Vec<Vec<usize>> = a.iter().map(|p| p.iter().map(|&x| x as usize).collect()).collect();
            GroupSubset::from_coords(g.clone(), &coords)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((n, d, g, members))
}

/// Uniform subsets of size `floor(eps N^d)` are drawn until every member
/// satisfies `A + B = Z_N^d`.
pub fn random_cover_complement(family: &SetFamily, eps: Rational, opts: CoverOptions) -> Result<RandomCover> {
    let (n, d, g, members) = grid_members(family)?;
    if *eps.numer() == 0 || eps > Rational::new(1, 1) {
        return Err(Error::Domain(format!("eps = {eps} must lie in (0, 1]")));
    }
    let order = g.order();
    let size = (order as u128 * *eps.numer() as u128 / *eps.denom() as u128) as usize;
    if size == 0 {
        return Err(Error::Domain("floor(eps N^d) is 0".into()));
    }
    let k = size_threshold(rational_f64(eps), members.len(), n, d as u32);
    let smallest = members.iter().map(|a| a.len()).min().unwrap_or(0);
    let threshold = ThresholdCheck::new("min |A| > (2/eps) ln(|family| N^d)", smallest as f64, k);
    opts.policy.apply(&threshold)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for draw in 1..=opts.max_draws {
        let idx = rand::seq::index::sample(&mut rng, order, size);
        let b = GroupSubset::from_indices(g.clone(), idx)?;
        let mut ok = true;
        for a in &members {
            if !sumset(a, &b)?.is_full() {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(RandomCover {
                set: b,
                certificate: RandomCoverCertificate {
                    schema: SCHEMA.into(),
                    n,
                    d,
                    eps,
                    size,
                    family_size: members.len(),
                    threshold,
                    draws: draw,
                    seed: opts.seed,
                    verified: true,
                },
            });
        }
    }
    Err(Error::RetryBudgetExhausted {
        draws: opts.max_draws,
        seed: opts.seed,
    })
}

/// Recomputes `A + B = Z_N^d` for every member.
pub fn verify_grid_cover(family: &SetFamily, b: &GroupSubset) -> Result<bool> {
    let (_, _, g, members) = grid_members(family)?;
    if b.group() != &g {
        return Err(Error::GroupMismatch {
            left: g.moduli().to_vec(),
            right: b.group().moduli().to_vec(),
        });
    }
    for a in &members {
        if !sumset(a, b)?.is_full() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxCover {
    pub set: SignedBoxSet,
    /// `A + B ⊇ [N]^d` in the integers for every member.
    pub verified: bool,
}

pub fn lift_cover_to_box(family: &SetFamily, b: &GroupSubset) -> Result<BoxCover> {
    let set = lift_to_signed_box(b)?;
    let verified = family
        .members
        .iter()
        .all(|a| set.covered_in_box(&a.iter().map(|p| p.to_vec()).collect::<Vec<_>>()).iter().all(|&x| x));
    Ok(BoxCover { set, verified })
}

/// Greedy cover of the family by Hausdorff balls of radius `2^{-e}`
/// centred at members. Returns the centre indices; their count bounds the
/// covering number from above.
pub fn family_hausdorff_cover(members: &[PointSet], e: u32) -> Result<Vec<usize>> {
    let mut centres: Vec<usize> = Vec::new();
    for (i, a) in members.iter().enumerate() {
        let mut covered = false;
        for &c in &centres {
            let (w, u) = hausdorff_distance_units(&members[c], a)?;
            // u 2^{-w} <= 2^{-e}
            let within = if w >= e { u <= 1i64 << (w - e) } else { u == 0 };
            if within {
                covered = true;
                break;
            }
        }
        if !covered {
            centres.push(i);
        }
    }
    Ok(centres)
}

/// Half-open cells of side `2^{sh}` lattice units holding points of `a` in
/// the cube `origin + [0, one]^d`; the far boundary is clamped into the last
/// cell.
fn cells_relative(a: &PointSet, origin: &[i64], one: i64, sh: u32) -> Vec<Vec<i64>> {
    let last = (one >> sh) - 1;
    let mut out: Vec<Vec<i64>> = a
        .iter()
        .filter(|p| p.iter().zip(origin).all(|(x, o)| *x >= *o && *x - *o <= one))
        .map(|p| p.iter().zip(origin).map(|(x, o)| ((x - o) >> sh).min(last)).collect())
        .collect();
    out.sort();
    out.dedup();
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicCoverCertificate {
    pub schema: String,
    pub eps: Rational,
    pub delta_exponent: u32,
    /// `|A|_delta` per member (grid cells of side delta).
    pub member_counts: Vec<usize>,
    /// Greedy Hausdorff-metric covering number of the family at delta.
    pub family_covering: usize,
    /// `min |A|_delta > (18^d/eps) ln(delta^{-1} |family|_delta)`
    pub threshold: ThresholdCheck,
    /// `eps / 6^d`, the density handed to the grid lemma
    pub eps_grid: Rational,
    pub grid: RandomCoverCertificate,
    pub signed_cells: usize,
    pub cells: usize,
    /// `|B| <= eps`, exact
    pub measure_ok: bool,
    pub coverage: Vec<CoverageCount>,
    pub coverage_exponent: u32,
    /// The proof's `|B| <= eta` is read as `|B| <= eps`.
    pub note: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicCover {
    pub set: ElementarySet,
    pub certificate: DyadicCoverCertificate,
}

/// A union of cubes of side `2^{-e}` inside `[-1,1]^d` with measure at most
/// `eps` such that `A + B ⊇ [0,1]^d` for every member (members in
/// `[0,1]^d`).
pub fn dyadic_cover_complement(family: &SetFamily, eps: Rational, e: u32, opts: CoverOptions) -> Result<DyadicCover> {
    family.validate()?;
    let Ambient::Cube { cube, exponent: w } = &family.ambient else {
        return Err(Error::Domain("continuous complements need a cube family".into()));
    };
    let w = *w;
    let d = cube.d();
    if *cube != LatticeBox::cube(vec![0; d], 1i64 << w) {
        return Err(Error::Domain("family must live in [0,1]^d".into()));
    }
    if e == 0 || e > w {
        return Err(Error::Domain(format!("delta = 2^-{e} must lie between 2^-{w} and 1/2")));
    }
    if *eps.numer() == 0 || eps > Rational::new(1, 1) {
        return Err(Error::Domain(format!("eps = {eps} must lie in (0, 1]")));
    }
    let m = 1i64 << e;
    let origin = vec![0i64; d];
    let deltas: Vec<Vec<Vec<i64>>> = family.members.iter().map(|a| cells_relative(a, &origin, 1i64 << w, w - e)).collect();
    let member_counts: Vec<usize> = deltas.iter().map(|c| c.len()).collect();
    let family_covering = family_hausdorff_cover(&family.members, e)?.len();
    let required = 18f64.powi(d as i32) / rational_f64(eps) * ((m as f64).ln() + (family_covering as f64).ln());
    let threshold = ThresholdCheck::new(
        "min |A|_delta > (18^d/eps) ln(delta^{-1} |family|_delta)",
        *member_counts.iter().min().unwrap() as f64,
        required,
    );
    opts.policy.apply(&threshold)?;

    let mut distinct = deltas.clone();
    distinct.sort();
    distinct.dedup();
    let grid_family = SetFamily::grid(
        m as u64,
        d,
        distinct.into_iter().map(|c| PointSet::new(d, 0, c)).collect::<Result<Vec<_>>>()?,
    )?;
    let eps_grid = eps / Rational::new(6u64.pow(d as u32), 1);
    let grid = random_cover_complement(&grid_family, eps_grid, opts)?;
    let signed = lift_to_signed_box(&grid.set)?;
    let neighbours = cube_offsets(d, &[-1, 0, 1]);
    let mut cells: Vec<i64> = Vec::new();
    for b in &signed.members {
        for nb in &neighbours {
            let v: Vec<i64> = b.iter().zip(nb).map(|(x, y)| x + y).collect();
            if v.iter().all(|&x| -m <= x && x < m) {
                cells.extend(v);
            }
        }
    }
    let set = ElementarySet::from_cells(d, e, &cells);
    let cell_count = set.volume_units() as usize;
    let measure_ok = set.volume_units() * *eps.denom() as u128 <= *eps.numer() as u128 * (m as u128).pow(d as u32);
    let target = LatticeBox::cube(vec![0; d], 1);
    let mut coverage = Vec::new();
    let mut coverage_exponent = e + 1;
    for a in &family.members {
        let (cw, c) = sumset_coverage(a, &set, &target, 0)?;
        coverage_exponent = coverage_exponent.max(cw);
        coverage.push(c);
    }
    let pass = measure_ok && coverage.iter().all(|c| c.complete()) && grid.certificate.verified;
    Ok(DyadicCover {
        set,
        certificate: DyadicCoverCertificate {
            schema: SCHEMA.into(),
            eps,
            delta_exponent: e,
            member_counts,
            family_covering,
            threshold,
            eps_grid,
            grid: grid.certificate,
            signed_cells: signed.len(),
            cells: cell_count,
            measure_ok,
            coverage,
            coverage_exponent,
            note: "|B| <= eta in the construction is read as |B| <= eps".into(),
            pass,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PigeonholeRecord {
    /// Grid counts of `A` in the `2^d` unit cubes with the anchor as vertex,
    /// offsets `u ∈ {0,1}^d` in lexicographic order.
    pub counts: Vec<usize>,
    pub chosen: usize,
    /// `|A ∩ (a + [-1,1]^d)|` on the same grid.
    pub around_anchor: usize,
    /// `|A|_delta` over the whole member.
    pub total: usize,
    /// `2^d max >= around_anchor`
    pub local_holds: bool,
    /// `2^d max >= total`
    pub literal_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchoredCoverCertificate {
    pub schema: String,
    pub eps: Rational,
    pub delta_exponent: u32,
    /// `delta' = 2 delta / r` after rescaling `Q` to `[-1,1]^d`
    pub rescaled_delta_exponent: u32,
    /// `min |A|_delta > (108^d/eps) ln(delta^{-1} |family|_delta)`
    pub threshold: ThresholdCheck,
    pub pigeonhole: Vec<PigeonholeRecord>,
    pub lemma: DyadicCoverCertificate,
    /// `|T| <= eps |Q|`, exact
    pub measure_ok: bool,
    pub within_2q: bool,
    pub within_3q: bool,
    pub coverage: Vec<CoverageCount>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchoredCover {
    pub set: ElementarySet,
    pub certificate: AnchoredCoverCertificate,
}

/// `T ⊂ 2Q` with `|T| <= eps |Q|` and `A + T ⊇ a(A) + Q` for every member.
/// `q` is a cube of side `2^t` at the family's exponent; the ambient box only
/// bounds the members. Cells of `T` have side `2^{-e}`.
pub fn anchored_cover_complement(
    family: &SetFamily,
    q: &LatticeBox,
    eps: Rational,
    e: u32,
    opts: CoverOptions,
) -> Result<AnchoredCover> {
    family.validate()?;
    let Ambient::Cube { cube: p, exponent: w } = &family.ambient else {
        return Err(Error::Domain("anchored complements need a cube family".into()));
    };
    let w = *w;
    let d = p.d();
    let Some(anchors) = &family.anchors else {
        return Err(Error::Malformed("anchored complements need anchors".into()));
    };
    // P only bounds the members; the rescaling is driven by Q
    let side = q.hi[0] - q.lo[0];
    if q.d() != d || (0..d).any(|i| q.hi[i] - q.lo[i] != side) || side < 2 || side & (side - 1) != 0 {
        return Err(Error::Malformed("Q must be a cube of power-of-two side".into()));
    }
    let t = side.trailing_zeros();
    if t > w {
        return Err(Error::Domain("side must be at most 1".into()));
    }
    if e > w || e + t < w + 2 {
        return Err(Error::Domain(format!("delta = 2^-{e} does not fit side 2^{t} at exponent {w}")));
    }
    // rescaled frame: Q becomes [-1,1]^d, so one rescaled unit is h = 2^{t-1}
    // lattice steps and delta' = delta / h
    let w_r = t - 1;
    let e_r = e + t - 1 - w;
    let unit = 1i64 << w_r;
    let sh = w - e;

    let family_covering = family_hausdorff_cover(&family.members, e)?.len();
    let offsets = cube_offsets(d, &[0, 1]);
    let mut pigeonhole = Vec::new();
    let mut lemma_members = Vec::new();
    let mut totals = Vec::new();
    for (a, anchor) in family.members.iter().zip(anchors) {
        let around_origin: Vec<i64> = anchor.iter().map(|x| x - unit).collect();
        let around = cells_relative(a, &around_origin, 2 * unit, sh).len();
        let total = grid_count_points(a, e)?;
        totals.push(total);
        let origins: Vec<Vec<i64>> = offsets
            .iter()
            .map(|u| anchor.iter().zip(u).map(|(x, ui)| x - unit + ui * unit).collect())
            .collect();
        let counts: Vec<usize> = origins.iter().map(|o| cells_relative(a, o, unit, sh).len()).collect();
        let best = *counts.iter().max().unwrap();
        let chosen = counts.iter().position(|&c| c == best).unwrap();
        let origin = &origins[chosen];
        let pts: Vec<Vec<i64>> = a
            .iter()
            .filter(|p| p.iter().zip(origin).all(|(x, o)| *x >= *o && *x - *o <= unit))
            .map(|p| p.iter().zip(origin).map(|(x, o)| x - o).collect())
            .collect();
        lemma_members.push(PointSet::new(d, w_r, pts)?);
        pigeonhole.push(PigeonholeRecord {
            local_holds: (best << d) >= around,
            literal_holds: (best << d) >= total,
            counts,
            chosen,
            around_anchor: around,
            total,
        });
    }
    let required = 108f64.powi(d as i32) / rational_f64(eps) * ((e as f64) * 2f64.ln() + (family_covering as f64).ln());
    let threshold = ThresholdCheck::new(
        "min |A|_delta > (108^d/eps) ln(delta^{-1} |family|_delta)",
        *totals.iter().min().unwrap() as f64,
        required,
    );
    opts.policy.apply(&threshold)?;

    let lemma_family = SetFamily::unit_cube(d, w_r, lemma_members)?;
    // |Q| = 2^d in the rescaled frame
    let eps_lemma = eps * Rational::new(1 << d, 3u64.pow(d as u32));
    let lemma = dyadic_cover_complement(&lemma_family, eps_lemma, e_r, opts)?;

    // T' = union over u in {0,1,2}^d of (B - 1 + u), still at exponent e_r
    let one_r = 1i64 << e_r;
    let parts: Vec<ElementarySet> = cube_offsets(d, &[0, 1, 2])
        .iter()
        .map(|u| lemma.set.translated(&u.iter().map(|ui| (ui - 1) * one_r).collect::<Vec<_>>()))
        .collect();
    let t_rescaled = ElementarySet::union_all(d, e_r, &parts)?;
    // back to the original frame: rescaled unit 2^{-e_r} is 2^{-e} absolute
    let big = w;
    let centre: Vec<i64> = q.lo.iter().map(|x| x + side / 2).collect();
    let step = w - e;
    let boxes: Vec<LatticeBox> = t_rescaled
        .boxes()
        .map(|b| LatticeBox {
            lo: b.lo.iter().zip(&centre).map(|(x, c)| (x << step) + c).collect(),
            hi: b.hi.iter().zip(&centre).map(|(x, c)| (x << step) + c).collect(),
        })
        .collect();
    let set = ElementarySet::from_boxes(d, big, &boxes)?;
    let q_big = q.at_exponent(w, big);
    let two_q = q_big.inflated(2).expect("integer inflation");
    let three_q = q_big.inflated(3);
    let within_2q = set.is_within(&two_q);
    let within_3q = three_q.map(|b| set.is_within(&b)).unwrap_or(within_2q);
    let measure_ok = set.volume_units() * *eps.denom() as u128 <= *eps.numer() as u128 * q_big.volume_units();
    let mut coverage = Vec::new();
    for (a, anchor) in family.members.iter().zip(anchors) {
        let target = q.translated(anchor);
        coverage.push(sumset_coverage(a, &set, &target, w)?.1);
    }
    let pass = measure_ok && within_2q && coverage.iter().all(|c| c.complete()) && lemma.certificate.pass;
    Ok(AnchoredCover {
        set,
        certificate: AnchoredCoverCertificate {
            schema: SCHEMA.into(),
            eps,
            delta_exponent: e,
            rescaled_delta_exponent: e_r,
            threshold,
            pigeonhole,
            lemma: lemma.certificate,
            measure_ok,
            within_2q,
            within_3q,
            coverage,
            pass,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn line(w: u32, xs: &[i64]) -> PointSet {
        PointSet::new(1, w, xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(size_threshold(0.3, 1, 1, 1), 0.0);
        assert!((size_threshold(0.5, 1, 64, 1) - 4.0 * 64f64.ln()).abs() < 1e-12);
        assert!((size_threshold(0.5, 1, 64, 1) - 16.635532333438686).abs() < 1e-9);
        assert!((size_threshold(0.5, 4, 16, 2) - 4.0 * 1024f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn whole_group_member() {
        let fam = SetFamily::grid(64, 1, vec![line(0, &(0..64).collect::<Vec<_>>())]).unwrap();
        let c = random_cover_complement(&fam, Rational::new(1, 2), CoverOptions::new(3)).unwrap();
        assert_eq!(c.certificate.draws, 1);
        assert_eq!(c.set.len(), 32);
    }

    #[test]
    fn twenty_point_member() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let idx = rand::seq::index::sample(&mut rng, 64, 20);
        let a = line(0, &idx.into_iter().map(|x| x as i64).collect::<Vec<_>>());
        let fam = SetFamily::grid(64, 1, vec![a.clone()]).unwrap();
        let c = random_cover_complement(&fam, Rational::new(1, 2), CoverOptions::new(7)).unwrap();
        assert_eq!(c.set.len(), 32);
        // brute-force oracle: every residue is a + b mod 64
        for x in 0..64i64 {
            assert!(a.iter().any(|p| c.set.contains((x - p[0]).rem_euclid(64) as usize)));
        }
        assert!(verify_grid_cover(&fam, &c.set).unwrap());
    }

    #[test]
    fn undersized_member_is_rejected() {
        let fam = SetFamily::grid(64, 1, vec![line(0, &[0, 1, 2])]).unwrap();
        let err = random_cover_complement(&fam, Rational::new(1, 2), CoverOptions::new(1)).unwrap_err();
        match err {
            Error::Threshold { required, .. } => assert!((required - 16.6355).abs() < 1e-3),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn single_draw_failure_rate_below_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<usize> = rand::seq::index::sample(&mut rng, 64, 20).into_vec();
        let mut uncovered_total = 0u64;
        let runs = 10_000;
        for _ in 0..runs {
            let b = rand::seq::index::sample(&mut rng, 64, 32).into_vec();
            let mut hit = [false; 64];
            for &x in &a {
                for &y in &b {
                    hit[(x + y) % 64] = true;
                }
            }
            uncovered_total += hit.iter().filter(|h| !**h).count() as u64;
        }
        assert!((uncovered_total as f64 / runs as f64) < 1.0);
    }

    #[test]
    fn lift_examples() {
        let g = FiniteAbelianGroup::cyclic(8).unwrap();
        let fam = SetFamily::grid(8, 1, vec![line(0, &(0..8).collect::<Vec<_>>())]).unwrap();
        let b = GroupSubset::from_indices(g, [0]).unwrap();
        let lifted = lift_cover_to_box(&fam, &b).unwrap();
        assert_eq!(lifted.set.members, vec![vec![-8], vec![0]]);
        assert!(lifted.verified);
        let g2 = FiniteAbelianGroup::power(4, 2).unwrap();
        let b2 = GroupSubset::from_indices(g2, [0, 3, 6, 9, 12]).unwrap();
        assert!(lift_to_signed_box(&b2).unwrap().len() <= 20);
    }

    #[test]
    fn lift_keeps_coverage_on_sixteen() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = FiniteAbelianGroup::cyclic(16).unwrap();
        for _ in 0..300 {
            let b = GroupSubset::from_mask(g.clone(), (0..16).map(|_| rng.gen_bool(0.3)).collect()).unwrap();
            let a: Vec<i64> = (0..16).filter(|_| rng.gen_bool(0.4)).collect();
            if a.is_empty() || b.is_empty() {
                continue;
            }
            let fam = SetFamily::grid(16, 1, vec![line(0, &a)]).unwrap();
            if verify_grid_cover(&fam, &b).unwrap() {
                assert!(lift_cover_to_box(&fam, &b).unwrap().verified);
            }
        }
    }

    #[test]
    fn dyadic_cover_sixty_points() {
        // 60 separated points of [0,1] at delta = 1/64, lattice exponent 8
        let xs: Vec<i64> = (0..60).map(|i| i * 4 + 2).collect();
        let fam = SetFamily::unit_cube(1, 8, vec![line(8, &xs)]).unwrap();
        let c = dyadic_cover_complement(&fam, Rational::new(1, 2), 6, CoverOptions::new(9).report_only()).unwrap();
        assert!(c.certificate.pass);
        assert!(c.set.volume() <= 0.5);
        assert!(c.set.is_within(&LatticeBox::cube(vec![-64], 128)));
        // independent pixel oracle at delta/2
        let fine = c.set.rescaled(8).unwrap();
        for pix in 0..128i64 {
            let (lo, hi) = (pix * 2, pix * 2 + 2);
            assert!(xs.iter().any(|x| fine.boxes().any(|b| b.lo[0] + x <= lo && hi <= b.hi[0] + x)));
        }
        assert!(!c.certificate.threshold.satisfied);
    }

    #[test]
    fn dyadic_cover_enforce_reports_threshold() {
        let fam = SetFamily::unit_cube(1, 6, vec![line(6, &[0, 5, 9])]).unwrap();
        assert!(matches!(
            dyadic_cover_complement(&fam, Rational::new(1, 2), 6, CoverOptions::new(1)),
            Err(Error::Threshold { .. })
        ));
    }

    #[test]
    fn full_grid_member_plane() {
        let pts: Vec<Vec<i64>> = (0..16).flat_map(|x| (0..16).map(move |y| vec![x, y])).collect();
        let fam = SetFamily::unit_cube(2, 4, vec![PointSet::new(2, 4, pts).unwrap()]).unwrap();
        let c = dyadic_cover_complement(&fam, Rational::new(1, 1), 4, CoverOptions::new(4).report_only()).unwrap();
        assert!(c.certificate.pass);
    }

    #[test]
    fn anchored_full_grid() {
        // P = Q = [0, 1/4], points on the 1/512 grid of P, anchor 0
        let w = 9;
        let side = 1i64 << (w - 2);
        let xs: Vec<i64> = (0..=side).collect();
        let p = LatticeBox::cube(vec![0], side);
        let fam = SetFamily {
            ambient: Ambient::Cube { cube: p.clone(), exponent: w },
            members: vec![line(w, &xs)],
            anchors: Some(vec![vec![0]]),
        };
        let c = anchored_cover_complement(&fam, &p, Rational::new(1, 2), w, CoverOptions::new(5).report_only()).unwrap();
        assert!(c.certificate.pass, "{:?}", c.certificate);
        assert!(c.certificate.within_2q);
        assert!(c.certificate.pigeonhole[0].local_holds);
    }

    #[test]
    fn anchored_hundred_points() {
        // r = 1/4, delta = r/128, one 100-point member, eps = 1/2
        let w = 12;
        let side = 1i64 << (w - 2);
        let p = LatticeBox::cube(vec![1 << (w - 1)], side);
        let q = LatticeBox::cube(vec![1 << (w - 3)], side);
        let xs: Vec<i64> = (0..100).map(|i| p.lo[0] + i * side / 99).collect();
        let anchor = vec![xs[37]];
        let fam = SetFamily {
            ambient: Ambient::Cube { cube: p, exponent: w },
            members: vec![line(w, &xs)],
            anchors: Some(vec![anchor.clone()]),
        };
        let e = 9;
        let c = anchored_cover_complement(&fam, &q, Rational::new(1, 2), e, CoverOptions::new(6).report_only());
        let c = c.unwrap();
        assert!(c.certificate.pass);
        assert!(c.set.volume_units() * 2 <= q.volume_units());
        assert_eq!(c.certificate.rescaled_delta_exponent, 6);
        // pigeonhole recount
        let ph = &c.certificate.pigeonhole[0];
        assert!(ph.counts[ph.chosen] * 2 >= ph.around_anchor);
        // independent coverage oracle of a + Q at the lattice
        let target_lo = q.lo[0] + anchor[0];
        for x in target_lo..target_lo + side {
            assert!(xs.iter().any(|a| c.set.boxes().any(|b| b.lo[0] + a <= x && x < b.hi[0] + a)));
        }
    }

    #[test]
    fn enlarging_member_keeps_cover() {
        let xs: Vec<i64> = (0..30).map(|i| i * 2).collect();
        let fam = SetFamily::grid(64, 1, vec![line(0, &xs)]).unwrap();
        let c = random_cover_complement(&fam, Rational::new(1, 2), CoverOptions::new(12)).unwrap();
        let mut bigger = xs.clone();
        bigger.extend([1, 3, 5]);
        let fam2 = SetFamily::grid(64, 1, vec![line(0, &bigger)]).unwrap();
        assert!(verify_grid_cover(&fam2, &c.set).unwrap());
    }

    #[test]
    fn family_json_round_trip() {
        let fam = SetFamily::unit_cube(1, 4, vec![line(4, &[1, 2])]).unwrap().with_anchors(vec![vec![2]]).unwrap();
        let s = serde_json::to_string(&fam).unwrap();
        assert_eq!(serde_json::from_str::<SetFamily>(&s).unwrap(), fam);
    }
}
