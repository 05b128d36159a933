//! `GF(p^n)` with an explicit irreducible modulus.
//!
//! An element is stored as the integer code `sum_i c_i p^i` of its coefficient
//! vector in the polynomial basis `1, x, ..., x^{n-1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{FiniteAbelianGroup, GroupSubset};

pub const DEFAULT_FIELD_CAP: u64 = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FieldElement(pub u64);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldSpec {
    p: u64,
    n: u32,
    /// `c_0, ..., c_n` with `c_n = 1`.
    modulus: Vec<u64>,
    q: u64,
    /// bit mask of the modulus, used when `p = 2`
    modulus_bits: u64,
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Distinct prime factors in increasing order.
pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

// Polynomials over Z_p as coefficient vectors, lowest degree first.

fn trim(mut a: Vec<u64>) -> Vec<u64> {
    while a.last() == Some(&0) {
        a.pop();
    }
    a
}

fn inv_mod(a: u64, p: u64) -> u64 {
    let mut r = 1;
    let (mut b, mut e) = (a % p, p - 2);
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

fn poly_rem(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let b = trim(b.to_vec());
    let mut r = trim(a.to_vec());
    let db = b.len() - 1;
    let lead_inv = inv_mod(b[db], p);
    while r.len() > db {
        let dr = r.len() - 1;
        let c = r[dr] * lead_inv % p;
        for i in 0..=db {
            let t = c * b[i] % p;
            r[dr - db + i] = (r[dr - db + i] + p - t) % p;
        }
        r = trim(r);
    }
    r
}

fn decode(mut code: u64, p: u64, len: usize) -> Vec<u64> {
    let mut out = vec![0; len];
    for c in out.iter_mut() {
        *c = code % p;
        code /= p;
    }
    out
}

fn encode(coeffs: &[u64], p: u64) -> u64 {
    coeffs.iter().rev().fold(0, |acc, &c| acc * p + c)
}

/// Irreducibility by trial division with every monic polynomial of degree
/// `1..=n/2`.
pub fn is_irreducible(modulus: &[u64], p: u64) -> bool {
    let f = trim(modulus.to_vec());
    if f.len() < 2 {
        return false;
    }
    let n = f.len() - 1;
    for deg in 1..=n / 2 {
        let count = p.pow(deg as u32);
        for low in 0..count {
            let mut g = decode(low, p, deg);
            g.push(1);
            if poly_rem(&f, &g, p).is_empty() {
                return false;
            }
        }
    }
    true
}

fn field_size(p: u64, n: u32) -> Option<u64> {
    p.checked_pow(n)
}

pub fn make_field(p: u64, n: u32) -> Result<FieldSpec> {
    make_field_with_cap(p, n, DEFAULT_FIELD_CAP)
}

/// Field with the smallest monic irreducible modulus of degree `n`, ordered by
/// the code `sum_i c_i p^i` (highest coefficient most significant).
pub fn make_field_with_cap(p: u64, n: u32, cap: u64) -> Result<FieldSpec> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if n == 0 {
        return Err(Error::Domain("field degree must be at least 1".into()));
    }
    let q = match field_size(p, n) {
        Some(q) if q <= cap => q,
        _ => {
            return Err(Error::FieldTooLarge {
                q: (p as u128).saturating_pow(n),
                cap,
            })
        }
    };
    for low in 0..q {
        let mut m = decode(low, p, n as usize);
        m.push(1);
        if is_irreducible(&m, p) {
            return Ok(FieldSpec::build(p, n, m, q));
        }
    }
    unreachable!("an irreducible polynomial of every degree exists")
}

impl FieldSpec {
    fn build(p: u64, n: u32, modulus: Vec<u64>, q: u64) -> Self {
        let modulus_bits = if p == 2 { encode(&modulus, 2) } else { 0 };
        Self {
            p,
            n,
            modulus,
            q,
            modulus_bits,
        }
    }

    /// Field with a caller-supplied modulus, checked for irreducibility.
    pub fn with_modulus(p: u64, modulus: Vec<u64>) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if modulus.len() < 2 || *modulus.last().unwrap() != 1 || modulus.iter().any(|&c| c >= p) {
            return Err(Error::Malformed("modulus must be monic with reduced coefficients".into()));
        }
        let n = (modulus.len() - 1) as u32;
        let q = field_size(p, n).filter(|&q| q <= DEFAULT_FIELD_CAP).ok_or(Error::FieldTooLarge {
            q: (p as u128).saturating_pow(n),
            cap: DEFAULT_FIELD_CAP,
        })?;
        if !is_irreducible(&modulus, p) {
            return Err(Error::Malformed(format!("modulus {modulus:?} is reducible over Z_{p}")));
        }
        Ok(Self::build(p, n, modulus, q))
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement(0)
    }

    pub fn one(&self) -> FieldElement {
        FieldElement(1)
    }

    pub fn element(&self, coeffs: &[u64]) -> Result<FieldElement> {
        if coeffs.len() != self.n as usize || coeffs.iter().any(|&c| c >= self.p) {
            return Err(Error::Malformed(format!(
                "coefficient vector {coeffs:?} is not in (Z_{})^{}",
                self.p, self.n
            )));
        }
        Ok(FieldElement(encode(coeffs, self.p)))
    }

    /// The class of `x` (equal to `p` when `n = 1`, reduced).
    pub fn x(&self) -> FieldElement {
        if self.n == 1 {
            FieldElement(self.p - self.modulus[0] % self.p).normalize(self.p)
        } else {
            FieldElement(self.p)
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = FieldElement> {
        (0..self.q).map(FieldElement)
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if self.p == 2 {
            return FieldElement(a.0 ^ b.0);
        }
        let (mut x, mut y, mut out, mut place) = (a.0, b.0, 0, 1);
        for _ in 0..self.n {
            out += (x % self.p + y % self.p) % self.p * place;
            x /= self.p;
            y /= self.p;
            place *= self.p;
        }
        FieldElement(out)
    }

    pub fn neg(&self, a: FieldElement) -> FieldElement {
        if self.p == 2 {
            return a;
        }
        let c: Vec<u64> = self.coefficients(a).iter().map(|&c| (self.p - c) % self.p).collect();
        FieldElement(encode(&c, self.p))
    }

    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if self.p == 2 {
            return FieldElement(self.mul_binary(a.0, b.0));
        }
        let n = self.n as usize;
        let (ca, cb) = (self.coefficients(a), self.coefficients(b));
        let mut prod = vec![0u64; 2 * n - 1];
        for i in 0..n {
            if ca[i] == 0 {
                continue;
            }
            for j in 0..n {
                prod[i + j] = (prod[i + j] + ca[i] * cb[j]) % self.p;
            }
        }
        // reduce with the monic modulus: x^n = -sum_{i<n} c_i x^i
        for top in (n..prod.len()).rev() {
            let c = prod[top];
            if c == 0 {
                continue;
            }
            prod[top] = 0;
            for i in 0..n {
                let t = c * self.modulus[i] % self.p;
                let k = top - n + i;
                prod[k] = (prod[k] + self.p - t) % self.p;
            }
        }
        FieldElement(encode(&prod[..n], self.p))
    }

    fn mul_binary(&self, mut a: u64, b: u64) -> u64 {
        let n = self.n;
        let mut prod = 0u64;
        let mut bb = b;
        while a != 0 {
            if a & 1 == 1 {
                prod ^= bb;
            }
            a >>= 1;
            bb <<= 1;
        }
        for bit in (n..2 * n).rev() {
            if prod >> bit & 1 == 1 {
                prod ^= self.modulus_bits << (bit - n);
            }
        }
        prod
    }

    pub fn pow(&self, a: FieldElement, mut e: u64) -> FieldElement {
        let mut base = a;
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement> {
        if a.0 == 0 {
            return Err(Error::Domain("zero has no inverse".into()));
        }
        Ok(self.pow(a, self.q - 2))
    }

    /// Multiplicative order of a nonzero element.
    pub fn order_of(&self, a: FieldElement) -> Result<u64> {
        if a.0 == 0 {
            return Err(Error::Domain("zero has no multiplicative order".into()));
        }
        let mut ord = self.q - 1;
        for r in prime_factors(self.q - 1) {
            while ord.is_multiple_of(r) && self.pow(a, ord / r) == self.one() {
                ord /= r;
            }
        }
        Ok(ord)
    }

    /// Smallest code generating `F_q^*`.
    pub fn generator(&self) -> FieldElement {
        let factors = prime_factors(self.q - 1);
        (1..self.q)
            .map(FieldElement)
            .find(|&g| factors.iter().all(|&r| self.pow(g, (self.q - 1) / r) != self.one()))
            .expect("the multiplicative group is cyclic")
    }

    /// `{x^k : x in F_q^*}` (plus `0` if asked), sorted by code.
    pub fn kth_power_set(&self, k: u64, include_zero: bool) -> Result<Vec<FieldElement>> {
        if k == 0 || !(self.q - 1).is_multiple_of(k) {
            return Err(Error::NotDivisor {
                k,
                q_minus_one: self.q - 1,
            });
        }
        let h = self.pow(self.generator(), k);
        let count = (self.q - 1) / k;
        let mut out = Vec::with_capacity(count as usize + 1);
        let mut cur = self.one();
        for _ in 0..count {
            out.push(cur);
            cur = self.mul(cur, h);
        }
        if include_zero {
            out.push(self.zero());
        }
        out.sort();
        Ok(out)
    }

    /// Polynomial-basis coordinates `(c_0, ..., c_{n-1})`.
    pub fn to_coordinates(&self, a: FieldElement) -> Vec<u64> {
        self.coefficients(a)
    }

    fn coefficients(&self, a: FieldElement) -> Vec<u64> {
        decode(a.0, self.p, self.n as usize)
    }

    /// The additive group `(Z_p)^n` that [`Self::to_coordinates`] maps onto.
    pub fn additive_group(&self) -> FiniteAbelianGroup {
        FiniteAbelianGroup::power(self.p as usize, self.n as usize).expect("p >= 2")
    }

    /// Image of a set of elements in `(Z_p)^n` under [`Self::to_coordinates`].
    pub fn coordinate_subset(&self, elems: &[FieldElement]) -> Result<GroupSubset> {
        let g = self.additive_group();
        let idx = elems
            .iter()
            .map(|&e| {
                let c: Vec<usize> = self.to_coordinates(e).iter().map(|&v| v as usize).collect();
                g.index_of(&c)
            })
            .collect::<Result<Vec<_>>>()?;
        GroupSubset::from_indices(g, idx)
    }
}

impl FieldElement {
    fn normalize(self, p: u64) -> Self {
        FieldElement(self.0 % p)
    }
}

#[derive(Serialize, Deserialize)]
struct FieldRecord {
    p: u64,
    n: u32,
    modulus: Vec<u64>,
}

impl Serialize for FieldSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FieldRecord {
            p: self.p,
            n: self.n,
            modulus: self.modulus.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FieldSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = FieldRecord::deserialize(d)?;
        let spec = FieldSpec::with_modulus(rec.p, rec.modulus).map_err(serde::de::Error::custom)?;
        if spec.n != rec.n {
            return Err(serde::de::Error::custom("degree disagrees with modulus length"));
        }
        Ok(spec)
    }
}
