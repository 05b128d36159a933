//! Gauss-sum complements: parameter selection, the bias complement in
//! `F_{2^n}`, its coverage bound, the lift to signed boxes and the continuous
//! patch built from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_field::{is_prime, make_field_with_cap, FieldSpec};
use crate::fourier::wht_i64;
use crate::geometry::{ElementarySet, LatticeBox};
use crate::group::{FiniteAbelianGroup, GroupSubset};
use crate::sumset::{linear_bias, sumset_cover_report, LinearBias};
use crate::threshold::ThresholdCheck;
use crate::Rational;

/// Default cap on `q` for parameter searches.
pub const DEFAULT_Q_CAP: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropositionParams {
    pub eta: Rational,
    pub m0: u64,
    pub d: u32,
    pub k: u64,
    pub s: u32,
    /// `m = 2^{s(k-1)}`
    pub m: u64,
    /// `q = m^d`
    pub q: u64,
}

impl PropositionParams {
    /// Bits per axis, `s (k - 1)`.
    pub fn axis_bits(&self) -> u32 {
        self.s * (self.k as u32 - 1)
    }

    pub fn field_degree(&self) -> u32 {
        self.d * self.axis_bits()
    }
}

fn check_eta(eta: Rational) -> Result<()> {
    if *eta.numer() == 0 || eta > Rational::new(1, 3) {
        return Err(Error::Domain(format!("eta = {eta} must lie in (0, 1/3]")));
    }
    Ok(())
}

/// Smallest prime in `[ceil(1/eta), floor(2/eta)]`.
pub fn bertrand_prime(eta: Rational) -> Result<u64> {
    let (n, d) = (*eta.numer(), *eta.denom());
    let lo = d.div_ceil(n);
    let hi = 2 * d / n;
    (lo..=hi)
        .find(|&k| is_prime(k))
        .ok_or_else(|| Error::Domain(format!("no prime in [{lo}, {hi}]")))
}

pub fn select_parameters(eta: Rational, m0: u64, d: u32, cap: u64) -> Result<PropositionParams> {
    check_eta(eta)?;
    if m0 == 0 || d == 0 {
        return Err(Error::Domain("m0 and d must be positive".into()));
    }
    let k = bertrand_prime(eta)?;
    let step = (k - 1) as u32;
    let mut s = 1u32;
    while (s * step) < 64 && (1u64 << (s * step)) < m0 {
        s += 1;
    }
    let bits = s * step;
    let total_bits = bits as u64 * d as u64;
    if total_bits >= 64 || (1u64 << total_bits) > cap {
        return Err(Error::CapExceeded {
            cap,
            required: if total_bits < 128 { 1u128 << total_bits } else { u128::MAX },
        });
    }
    let m = 1u64 << bits;
    let q = 1u64 << total_bits;
    if !(q - 1).is_multiple_of(k) {
        return Err(Error::NotDivisor { k, q_minus_one: q - 1 });
    }
    // m <= 4^{1/eta} m0, compared in log2
    let lhs = bits as f64;
    let rhs = 2.0 * (*eta.denom() as f64) / (*eta.numer() as f64) + (m0 as f64).log2();
    if lhs > rhs + 1e-12 {
        return Err(Error::Invariant {
            invariant: "m <= 4^{1/eta} m0".into(),
            step: 0,
            detail: format!("log2 m = {lhs}, bound {rhs}"),
        });
    }
    Ok(PropositionParams {
        eta,
        m0,
        d,
        k,
        s,
        m,
        q,
    })
}

/// Reads the `n = d L` polynomial coordinates as `d` base-2 numbers of `L`
/// digits each: axis `t` is `sum_u c_{tL+u} 2^u`.
pub fn digit_reinterpretation(coords: &[u64], d: usize, bits: usize) -> Vec<usize> {
    (0..d)
        .map(|t| (0..bits).map(|u| (coords[t * bits + u] as usize) << u).sum())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DigitImage {
    pub set: GroupSubset,
    pub bias: LinearBias,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasComplement {
    pub params: PropositionParams,
    pub field: FieldSpec,
    /// Coordinate image of the `k`-th powers in `(Z_2)^{d s (k-1)}`.
    pub set: GroupSubset,
    pub bias: LinearBias,
    /// `|B| <= eta q`, exact.
    pub size_ok: bool,
    /// `bias < q^{-1/2}`, exact.
    pub bias_ok: bool,
    pub digit_image: Option<DigitImage>,
}

pub fn build_bias_complement(params: &PropositionParams, with_digit_image: bool, cap: u64) -> Result<BiasComplement> {
    let field = make_field_with_cap(2, params.field_degree(), cap)?;
    let powers = field.kth_power_set(params.k, false)?;
    let set = field.coordinate_subset(&powers)?;
    let bias = linear_bias(&set)?;
    let size_ok = set.len() as u128 * *params.eta.denom() as u128 <= *params.eta.numer() as u128 * params.q as u128;
    let bias_ok = bias.below_inverse_sqrt(params.q);
    let digit_image = if with_digit_image {
        let g = FiniteAbelianGroup::power(params.m as usize, params.d as usize)?;
        let bits = params.axis_bits() as usize;
        let idx = powers
            .iter()
            .map(|&e| g.index_of(&digit_reinterpretation(&field.to_coordinates(e), params.d as usize, bits)))
            .collect::<Result<Vec<_>>>()?;
        let img = GroupSubset::from_indices(g, idx)?;
        let b = linear_bias(&img)?;
        Some(DigitImage { set: img, bias: b })
    } else {
        None
    };
    Ok(BiasComplement {
        params: params.clone(),
        field,
        set,
        bias,
        size_ok,
        bias_ok,
        digit_image,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageCertificate {
    pub order: usize,
    pub a_size: usize,
    pub b_size: usize,
    pub sumset_size: usize,
    pub eta: Rational,
    /// `1 + 1/(4 eta^2 |A|)`
    pub stated_bound: f64,
    pub stated_holds: bool,
    /// `1 + ||B||_u^2 |G|^3 / (|A| |B|^2)`
    pub lemma_bound: f64,
    pub lemma_holds: bool,
    pub pass: bool,
}

/// `|G| / |A+B| <= 1 + 1/(4 eta^2 |A|)`, exact in integers.
fn stated_inequality(order: u128, a: u128, s: u128, eta: Rational) -> bool {
    let (n, d) = (*eta.numer() as u128, *eta.denom() as u128);
    order * 4 * n * n * a <= s * (4 * n * n * a + d * d)
}

fn stated_bound_value(a: usize, eta: Rational) -> f64 {
    let e = *eta.numer() as f64 / *eta.denom() as f64;
    1.0 + 1.0 / (4.0 * e * e * a as f64)
}

pub fn verify_coverage_bound(a: &GroupSubset, b: &GroupSubset, eta: Rational) -> Result<CoverageCertificate> {
    if a.is_empty() {
        return Err(Error::EmptySet("A"));
    }
    let r = sumset_cover_report(a, b)?;
    Ok(CoverageCertificate {
        order: r.order,
        a_size: r.a_size,
        b_size: r.b_size,
        sumset_size: r.sumset_size,
        eta,
        stated_bound: stated_bound_value(r.a_size, eta),
        stated_holds: stated_inequality(r.order as u128, r.a_size as u128, r.sumset_size as u128, eta),
        lemma_bound: r.bound,
        lemma_holds: r.holds,
        pass: false,
    }
    .finish())
}

impl CoverageCertificate {
    fn finish(mut self) -> Self {
        self.pass = self.stated_holds && self.lemma_holds;
        self
    }
}

/// Verifies many sets `A` against one binary-group complement `B`, reusing
/// the Walsh spectrum of `B`.
pub struct BinaryCoverageVerifier {
    b_spectrum: Vec<i64>,
    b_size: usize,
    walsh_max: u64,
    order: usize,
    eta: Rational,
}

impl BinaryCoverageVerifier {
    pub fn new(b: &GroupSubset, eta: Rational) -> Result<Self> {
        if !b.group().is_binary() {
            return Err(Error::Domain("binary verifier needs all moduli 2".into()));
        }
        if b.is_empty() {
            return Err(Error::EmptySet("B"));
        }
        let mut spec: Vec<i64> = b.membership().iter().map(|&x| x as i64).collect();
        wht_i64(&mut spec);
        let walsh_max = spec[1..].iter().map(|v| v.unsigned_abs()).max().unwrap_or(0);
        Ok(Self {
            b_spectrum: spec,
            b_size: b.len(),
            walsh_max,
            order: b.group().order(),
            eta,
        })
    }

    /// `A` given as a membership mask over the same group.
    pub fn certify(&self, a_mask: &[bool]) -> Result<CoverageCertificate> {
        if a_mask.len() != self.order {
            return Err(Error::Malformed("mask length differs from group order".into()));
        }
        let a_size = a_mask.iter().filter(|&&x| x).count();
        if a_size == 0 {
            return Err(Error::EmptySet("A"));
        }
        let mut fa: Vec<i64> = a_mask.iter().map(|&x| x as i64).collect();
        wht_i64(&mut fa);
        for (x, y) in fa.iter_mut().zip(&self.b_spectrum) {
            *x *= *y;
        }
        wht_i64(&mut fa);
        let s = fa.iter().filter(|&&c| c > 0).count();
        let (n, na, nb, ns, w) = (
            self.order as u128,
            a_size as u128,
            self.b_size as u128,
            s as u128,
            self.walsh_max as u128,
        );
        let bias = w as f64 / n as f64;
        Ok(CoverageCertificate {
            order: self.order,
            a_size,
            b_size: self.b_size,
            sumset_size: s,
            eta: self.eta,
            stated_bound: stated_bound_value(a_size, self.eta),
            stated_holds: stated_inequality(n, na, ns, self.eta),
            lemma_bound: 1.0 + bias * bias * (n as f64).powi(3) / (na as f64 * (nb * nb) as f64),
            lemma_holds: n * na * nb * nb <= ns * (na * nb * nb + w * w * n),
            pass: false,
        }
        .finish())
    }
}

/// A finite subset of `{-m, ..., m-1}^d`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedBoxSet {
    pub d: usize,
    pub m: u64,
    pub members: Vec<Vec<i64>>,
}

/// Union of the translates of `B` (read in `[m]^d`) by `{-m, 0}^d`.
pub fn lift_to_signed_box(b: &GroupSubset) -> Result<SignedBoxSet> {
    let g = b.group();
    let m = g.moduli()[0];
    if g.moduli().iter().any(|&x| x != m) {
        return Err(Error::InvalidGroup(format!("{:?} is not of the form Z_m^d", g.moduli())));
    }
    let d = g.rank();
    let mut members = Vec::with_capacity(b.len() << d);
    for i in b.indices() {
        let c = g.coords_of(i);
        for u in 0..1usize << d {
            members.push(
                (0..d)
                    .map(|t| c[t] as i64 - if u >> (d - 1 - t) & 1 == 1 { m as i64 } else { 0 })
                    .collect::<Vec<i64>>(),
            );
        }
    }
    members.sort();
    members.dedup();
    Ok(SignedBoxSet { d, m: m as u64, members })
}

impl SignedBoxSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn within_range(&self) -> bool {
        let m = self.m as i64;
        self.members.iter().all(|v| v.len() == self.d && v.iter().all(|&x| -m <= x && x < m))
    }

    /// Mask over `[m]^d` (lexicographic) of points `a + b` lying in `[m]^d`.
    pub fn covered_in_box(&self, a: &[Vec<i64>]) -> Vec<bool> {
        let m = self.m as i64;
        let d = self.d;
        let total = (self.m as usize).pow(d as u32);
        let mut mask = vec![false; total];
        for p in a {
            for b in &self.members {
                let mut idx = 0usize;
                let mut inside = true;
                for t in 0..d {
                    let x = p[t] + b[t];
                    if x < 0 || x >= m {
                        inside = false;
                        break;
                    }
                    idx = idx * self.m as usize + x as usize;
                }
                if inside {
                    mask[idx] = true;
                }
            }
        }
        mask
    }
}

/// Mask over `Z_m^d` of the cyclic sumset `A + B` with `A` given in `[m]^d`.
pub fn cyclic_covered(b: &GroupSubset, a: &[Vec<i64>]) -> Result<Vec<bool>> {
    let g = b.group();
    let coords: Vec<Vec<usize>> = a.iter().map(|p| p.iter().map(|&x| x as usize).collect()).collect();
    let aset = GroupSubset::from_coords(g.clone(), &coords)?;
    Ok(crate::sumset::sumset(&aset, b)?.membership().to_vec())
}

/// How the patch complement picks its field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatchRule {
    /// Proposition parameters at `eta 6^{-d}` with the given `m0`.
    Literal { m0: u64 },
    /// Smallest prime `k >= 3` whose minimal field `F_{2^{dL}}` (`k | 2^{dL}-1`)
    /// fits the cap and whose inflated pattern measures at most `eta |Q|`.
    Measured,
}

/// A fixed patch pattern: cells of side `h/m` in coordinates centred at the
/// centre of `Q`, where `h` is half the side of `Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchDesign {
    pub d: usize,
    pub eta: Rational,
    pub rule: PatchRule,
    pub k: u64,
    /// bits per axis, `m = 2^L`
    pub axis_bits: u32,
    pub m: u64,
    pub field: FieldSpec,
    /// Digit image of the `k`-th powers in `Z_m^d`.
    pub base: GroupSubset,
    pub base_bias: LinearBias,
    /// Pattern cells, flat, sorted.
    pub cells: Vec<i64>,
}

impl PatchDesign {
    pub fn cell_count(&self) -> usize {
        self.cells.len() / self.d
    }

    /// `|pattern| <= eta |Q|`, exact: `|Q| = (2m)^d` cells.
    pub fn measure_ok(&self) -> bool {
        let total = (2 * self.m as u128).pow(self.d as u32);
        self.cell_count() as u128 * *self.eta.denom() as u128 <= *self.eta.numer() as u128 * total
    }

    pub fn new(eta: Rational, d: usize, rule: PatchRule, cap: u64) -> Result<Self> {
        if *eta.numer() == 0 || eta > Rational::new(1, 1) {
            return Err(Error::Domain(format!("eta = {eta} must lie in (0, 1]")));
        }
        match rule {
            PatchRule::Literal { m0 } => {
                let inner = eta / Rational::new(6u64.pow(d as u32), 1);
                let params = select_parameters(inner, m0, d as u32, cap)?;
                Self::build(eta, d, rule, params.k, params.axis_bits(), cap)
            }
            PatchRule::Measured => {
                let mut k = 3;
                loop {
                    if is_prime(k) {
                        let ord = multiplicative_order_of_two(k);
                        let l = ord / gcd(ord, d as u64);
                        let bits = l * d as u64;
                        if bits < 64 && (1u64 << bits) <= cap {
                            let design = Self::build(eta, d, rule, k, l as u32, cap)?;
                            if design.measure_ok() {
                                return Ok(design);
                            }
                        } else if k > 64 * d as u64 + 64 {
                            return Err(Error::CapExceeded {
                                cap,
                                required: 1u128 << bits.min(127),
                            });
                        }
                    }
                    k += 1;
                }
            }
        }
    }

    fn build(eta: Rational, d: usize, rule: PatchRule, k: u64, axis_bits: u32, cap: u64) -> Result<Self> {
        let field = make_field_with_cap(2, d as u32 * axis_bits, cap)?;
        let powers = field.kth_power_set(k, false)?;
        let m = 1u64 << axis_bits;
        let g = FiniteAbelianGroup::power(m as usize, d)?;
        let idx = powers
            .iter()
            .map(|&e| g.index_of(&digit_reinterpretation(&field.to_coordinates(e), d, axis_bits as usize)))
            .collect::<Result<Vec<_>>>()?;
        let base = GroupSubset::from_indices(g, idx)?;
        let base_bias = linear_bias(&base)?;
        let lifted = lift_to_signed_box(&base)?;
        let mi = m as i64;
        let mut cells: Vec<Vec<i64>> = Vec::new();
        let neighbours = cube_offsets(d, &[-1, 0, 1]);
        let corners = cube_offsets(d, &[0, 1, 2]);
        for b in &lifted.members {
            for e in &neighbours {
                for u in &corners {
                    cells.push((0..d).map(|t| b[t] + e[t] + mi * u[t]).collect());
                }
            }
        }
        cells.sort();
        cells.dedup();
        Ok(Self {
            d,
            eta,
            rule,
            k,
            axis_bits,
            m,
            field,
            base,
            base_bias,
            cells: cells.concat(),
        })
    }
}

/// All vectors in `values^d`, lexicographic.
pub fn cube_offsets(d: usize, values: &[i64]) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|v: Vec<i64>| {
                values.iter().map(move |&x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    out
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn multiplicative_order_of_two(k: u64) -> u64 {
    let mut x = 2 % k;
    let mut n = 1;
    while x != 1 {
        x = x * 2 % k;
        n += 1;
    }
    n
}

/// A patch complement placed on a concrete cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchComplement {
    pub set: ElementarySet,
    /// `|B| <= eta |Q|`, exact
    pub measure_ok: bool,
    /// `B` inside `4 Q`
    pub within_4q: bool,
    /// Largeness threshold `5^d 2^d N` reported for the corollary.
    pub threshold: ThresholdCheck,
}

/// Largeness threshold attached to the patch: `N = 5^d 2^d N_prop` where
/// `N_prop` makes the stated Proposition bound give coverage `1 - eps` at
/// density `eta 6^{-d} 2^{-d}`.
pub fn patch_threshold(eta: Rational, eps: f64, d: usize) -> f64 {
    let e = *eta.numer() as f64 / *eta.denom() as f64 / 6f64.powi(d as i32) / 2f64.powi(d as i32);
    let n_prop = ((1.0 - eps) / (4.0 * e * e * eps)).ceil();
    5f64.powi(d as i32) * 2f64.powi(d as i32) * n_prop
}

/// Places `design` on the cube `q` (given at exponent `q_exponent`, side a
/// power of two in lattice units). Cells have side `h / m`; the result is at
/// exponent `q_exponent + 1 + L - t` where the side of `q` is `2^t`.
///
/// `delta_exponent` is the resolution the caller works at; the cells must not
/// be finer than it.
pub fn continuous_patch_complement(
    q: &LatticeBox,
    q_exponent: u32,
    delta_exponent: u32,
    design: &PatchDesign,
    eps: f64,
    measured_count: f64,
) -> Result<PatchComplement> {
    let d = design.d;
    if q.d() != d {
        return Err(Error::Malformed("cube dimension differs from design".into()));
    }
    let side = q.hi[0] - q.lo[0];
    if (0..d).any(|i| q.hi[i] - q.lo[i] != side) || side <= 0 || (side & (side - 1)) != 0 {
        return Err(Error::Malformed(format!("{q:?} is not a cube of power-of-two side")));
    }
    let t = side.trailing_zeros();
    if t > design.axis_bits {
        return Err(Error::Domain("cube side too large for the design resolution".into()));
    }
    let w = q_exponent + 1 + design.axis_bits - t;
    if w > delta_exponent {
        return Err(Error::Threshold {
            what: format!("working scale 2^-{delta_exponent} coarser than patch cells 2^-{w}"),
            measured: (-(delta_exponent as f64)).exp2(),
            required: (-(w as f64)).exp2(),
        });
    }
    let shift = design.axis_bits - t;
    let centre: Vec<i64> = (0..d).map(|i| (2 * q.lo[i] + side) << shift).collect();
    let cells: Vec<i64> = design
        .cells
        .chunks(d)
        .flat_map(|c| c.iter().zip(&centre).map(|(a, b)| a + b).collect::<Vec<_>>())
        .collect();
    let set = ElementarySet::from_cells(d, w, &cells);
    let q_fine = q.at_exponent(q_exponent, w);
    let four_q = q_fine.inflated(4).expect("even side at the cell exponent");
    let within_4q = set.is_within(&four_q);
    let measure_ok = set.volume_units() * *design.eta.denom() as u128
        <= *design.eta.numer() as u128 * q_fine.volume_units();
    Ok(PatchComplement {
        set,
        measure_ok,
        within_4q,
        threshold: ThresholdCheck::new("patch largeness |A|_delta", measured_count, patch_threshold(design.eta, eps, d)),
    })
}
