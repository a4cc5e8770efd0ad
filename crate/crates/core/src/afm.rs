//! Dense complex linear algebra and the discrete affine Fourier transform.
//!
//! Vectors and matrices are plain `nalgebra` types over `Complex64`. The
//! matrix builders here are the reference definitions; the modem uses the
//! [`transform`] primitive for its fast paths and is checked against them.

use std::cell::RefCell;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{dim, param, Result};

pub type CVec = DVector<Complex64>;
pub type CMat = DMatrix<Complex64>;

/// `exp(i·2π·turns)`, with the argument reduced to `[-½, ½]` first.
#[inline]
pub fn cis_turns(turns: f64) -> Complex64 {
    let t = turns - turns.round();
    Complex64::from_polar(1.0, 2.0 * PI * t)
}

/// Chirp phases `e^{-i2πcn²}` for `n = 0..len`.
pub fn chirp_phases(c: f64, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|n| {
            let n = n as f64;
            cis_turns(-c * n * n)
        })
        .collect()
}

/// `Λ_c = diag(e^{-i2πcn²})`, `n = 0..N-1`.
pub fn chirp_diag(c: f64, n: usize) -> Result<CMat> {
    if n == 0 {
        return Err(dim("chirp diagonal needs N >= 1"));
    }
    Ok(CMat::from_diagonal(&CVec::from_vec(chirp_phases(c, n))))
}

/// The compressed DFT matrix with entries `(1/√N)·e^{-i2παmn/N}`.
pub fn scaled_dft_matrix(n: usize, alpha: f64) -> Result<CMat> {
    if n == 0 {
        return Err(dim("scaled DFT needs N >= 1"));
    }
    check_alpha(alpha)?;
    let scale = 1.0 / (n as f64).sqrt();
    let nf = n as f64;
    Ok(CMat::from_fn(n, n, |m, k| {
        // (m·k) mod N keeps the argument small when alpha = 1.
        let prod = if alpha == 1.0 { ((m * k) % n) as f64 } else { (m * k) as f64 };
        cis_turns(-alpha * prod / nf) * scale
    }))
}

/// `A_α = Λ_{c2} F_α Λ_{c1}`, accepting any real `α ∈ (0, 1]`.
pub fn modulation_matrix(n: usize, alpha: f64, c1: f64, c2: f64) -> Result<CMat> {
    let f = scaled_dft_matrix(n, alpha)?;
    let l1 = chirp_phases(c1, n);
    let l2 = chirp_phases(c2, n);
    Ok(CMat::from_fn(n, n, |m, k| l2[m] * f[(m, k)] * l1[k]))
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(param(format!("compression factor {alpha} outside (0, 1]")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `e^{-i2πkn/L}` kernel.
    Forward,
    /// `e^{+i2πkn/L}` kernel.
    Inverse,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: Direction) -> std::sync::Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        match direction {
            Direction::Forward => p.plan_fft_forward(len),
            Direction::Inverse => p.plan_fft_inverse(len),
        }
    })
}

/// In-place DFT/IDFT of any length with symmetric `1/√L` normalization.
pub fn transform_in_place(buf: &mut [Complex64], direction: Direction) -> Result<()> {
    let len = buf.len();
    if len == 0 {
        return Err(dim("transform length must be positive"));
    }
    plan(len, direction).process(buf);
    let scale = 1.0 / (len as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
    Ok(())
}

/// DFT/IDFT of `vec`, which must have exactly `length` entries.
pub fn transform(vec: &[Complex64], length: usize, direction: Direction) -> Result<CVec> {
    if length == 0 {
        return Err(dim("transform length must be positive"));
    }
    if vec.len() != length {
        return Err(dim(format!("vector has {} entries, expected {length}", vec.len())));
    }
    let mut buf = vec.to_vec();
    transform_in_place(&mut buf, direction)?;
    Ok(CVec::from_vec(buf))
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff_vec(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub(crate) fn all_finite<'a>(it: impl IntoIterator<Item = &'a Complex64>) -> bool {
    it.into_iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
