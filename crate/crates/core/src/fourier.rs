//! Discrete Fourier transform on finite abelian groups.
//!
//! Forward: `f^(xi) = |G|^{-1} sum_x f(x) e(-x.xi)`. Inverse carries no factor.
//! Convolution: `(f*g)(x) = |G|^{-1} sum_y f(y) g(x-y)`, so `(f*g)^ = f^ g^`.

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::group::{FiniteAbelianGroup, GroupFunction};

/// In-place unnormalized Walsh-Hadamard transform. Length must be a power of two.
pub fn wht_i64(data: &mut [i64]) {
    debug_assert!(data.len().is_power_of_two());
    let n = data.len();
    let mut h = 1;
    while h < n {
        for block in data.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

fn wht_complex(data: &mut [Complex64]) {
    let n = data.len();
    let mut h = 1;
    while h < n {
        for block in data.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Walsh spectrum of a subset mask: `W(xi) = sum_{x in B} (-1)^{popcount(x & xi)}`.
pub fn walsh_spectrum(mask: &[bool]) -> Vec<i64> {
    let mut v: Vec<i64> = mask.iter().map(|&b| b as i64).collect();
    wht_i64(&mut v);
    v
}

/// Unnormalized multidimensional transform along every axis.
fn fft_axes(group: &FiniteAbelianGroup, data: &mut [Complex64], direction: FftDirection) {
    let moduli = group.moduli();
    let mut planner = FftPlanner::<f64>::new();
    let mut stride = 1usize;
    let mut strides = vec![0; moduli.len()];
    for j in (0..moduli.len()).rev() {
        strides[j] = stride;
        stride *= moduli[j];
    }
    let n = data.len();
    let mut line = Vec::new();
    for (j, &m) in moduli.iter().enumerate() {
        if m == 1 {
            continue;
        }
        let s = strides[j];
        let fft = planner.plan_fft(m, direction);
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        line.resize(m, Complex64::new(0.0, 0.0));
        let block = m * s;
        for base in (0..n).step_by(block) {
            for i in 0..s {
                for t in 0..m {
                    line[t] = data[base + t * s + i];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for t in 0..m {
                    data[base + t * s + i] = line[t];
                }
            }
        }
    }
}

pub fn dft(f: &GroupFunction) -> Result<GroupFunction> {
    let g = f.group();
    if g.order() == 0 {
        return Err(Error::InvalidGroup("order 0".into()));
    }
    let mut data = f.values().to_vec();
    if g.is_binary() {
        wht_complex(&mut data);
    } else {
        fft_axes(g, &mut data, FftDirection::Forward);
    }
    let scale = 1.0 / g.order() as f64;
    for v in &mut data {
        *v *= scale;
    }
    GroupFunction::new(g.clone(), data)
}

pub fn idft(fhat: &GroupFunction) -> Result<GroupFunction> {
    let g = fhat.group();
    let mut data = fhat.values().to_vec();
    if g.is_binary() {
        wht_complex(&mut data);
    } else {
        fft_axes(g, &mut data, FftDirection::Inverse);
    }
    GroupFunction::new(g.clone(), data)
}

fn same_group(a: &FiniteAbelianGroup, b: &FiniteAbelianGroup) -> Result<()> {
    if a != b {
        return Err(Error::GroupMismatch {
            left: a.moduli().to_vec(),
            right: b.moduli().to_vec(),
        });
    }
    Ok(())
}

/// Normalized convolution computed through the transform.
pub fn convolve(f: &GroupFunction, g: &GroupFunction) -> Result<GroupFunction> {
    same_group(f.group(), g.group())?;
    let (fh, gh) = (dft(f)?, dft(g)?);
    let prod = fh
        .values()
        .iter()
        .zip(gh.values())
        .map(|(a, b)| a * b)
        .collect();
    idft(&GroupFunction::new(f.group().clone(), prod)?)
}

/// Normalized convolution by the defining double sum, `O(|G|^2)`.
pub fn convolve_direct(f: &GroupFunction, g: &GroupFunction) -> Result<GroupFunction> {
    same_group(f.group(), g.group())?;
    let grp = f.group();
    let n = grp.order();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (x, slot) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for y in 0..n {
            acc += f.values()[y] * g.values()[grp.sub(x, y)];
        }
        *slot = acc / n as f64;
    }
    GroupFunction::new(grp.clone(), out)
}
