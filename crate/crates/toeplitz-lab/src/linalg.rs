//! Dense complex linear algebra and FFT helpers shared by every module.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use matrixmultiply::CGemmOption;
use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{LabError, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Product through the packed complex GEMM kernel.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions differ");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut out = CMat::zeros(m, n);
    if m == 0 || k == 0 || n == 0 {
        return out;
    }
    // SAFETY: nalgebra dense storage is column-major and contiguous, and
    // Complex64 is repr(C) with the same layout as [f64; 2].
    unsafe {
        matrixmultiply::zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            out.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    out
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x % (2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    } else if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

/// Moves `z` by a multiple of 2πi so that its imaginary part is closest to `reference`.
pub fn nearest_branch(z: C64, reference: f64) -> C64 {
    let turns = ((reference - z.im) / (2.0 * PI)).round();
    C64::new(z.re, z.im + turns * 2.0 * PI)
}

#[derive(Clone, Debug)]
pub struct LuLogDet {
    /// Principal-branch log of the determinant; `None` when a pivot vanishes.
    pub log_det: Option<C64>,
    pub min_pivot: f64,
    pub max_pivot: f64,
}

pub fn lu_log_det(m: CMat) -> LuLogDet {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    if n == 0 {
        return LuLogDet { log_det: Some(ZERO), min_pivot: f64::INFINITY, max_pivot: 0.0 };
    }
    let lu = m.lu();
    let sign: f64 = lu.p().determinant();
    let u = lu.u();
    let mut acc = ZERO;
    let mut min_pivot = f64::INFINITY;
    let mut max_pivot: f64 = 0.0;
    for i in 0..n {
        let p = u[(i, i)];
        let r = p.norm();
        min_pivot = min_pivot.min(r);
        max_pivot = max_pivot.max(r);
        acc += p.ln();
    }
    let singular = !(min_pivot > 1e-15 * max_pivot);
    if sign < 0.0 {
        acc += C64::new(0.0, PI);
    }
    LuLogDet {
        log_det: if singular { None } else { Some(C64::new(acc.re, wrap_angle(acc.im))) },
        min_pivot,
        max_pivot,
    }
}

pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let scale = max_abs(m);
    if max_abs(&(m - m.adjoint())) <= 1e-14 * scale {
        let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
        return Ok(h.symmetric_eigenvalues().iter().map(|&x| C64::new(x, 0.0)).collect());
    }
    if let Some(s) = Schur::try_new(m.clone(), f64::EPSILON, 200 * n + 1000) {
        let (_, t) = s.unpack();
        return Ok((0..n).map(|i| t[(i, i)]).collect());
    }
    // A complex shift breaks the symmetric stalls the unshifted iteration can fall into.
    let shift = C64::new(0.37, 0.61) * scale.max(1.0);
    let shifted = m + CMat::identity(n, n) * shift;
    let schur = Schur::try_new(shifted, f64::EPSILON, 400 * n + 2000).ok_or(LabError::EigenFailure(n))?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)] - shift).collect())
}

/// Singular values in nonincreasing order; uses a real SVD when the matrix is real.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let scale = m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    let imag = m.iter().fold(0.0f64, |acc, z| acc.max(z.im.abs()));
    let mut s: Vec<f64> = if imag <= 1e-15 * scale {
        m.map(|z| z.re).singular_values().iter().copied().collect()
    } else {
        m.singular_values().iter().copied().collect()
    };
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

pub fn spectral_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    // The Gram matrix of the short side keeps the SVD small for thin blocks.
    let (r, c) = (m.nrows(), m.ncols());
    if r > 2 * c {
        let g = matmul(&m.adjoint(), m);
        return singular_values(&g).first().copied().unwrap_or(0.0).sqrt();
    }
    if c > 2 * r {
        let g = matmul(m, &m.adjoint());
        return singular_values(&g).first().copied().unwrap_or(0.0).sqrt();
    }
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn trace(m: &CMat) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// tr(A·B) without forming the product.
pub fn trace_of_product(a: &CMat, b: &CMat) -> C64 {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

pub fn fft_plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut p = planner().lock().unwrap_or_else(|e| e.into_inner());
    if inverse {
        p.plan_fft_inverse(len)
    } else {
        p.plan_fft_forward(len)
    }
}

/// Unnormalized in-place transform.
pub fn fft_in_place(buf: &mut [C64], inverse: bool) {
    if buf.len() <= 1 {
        return;
    }
    fft_plan(buf.len(), inverse).process(buf);
}

/// Full linear convolution.
pub fn convolve(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 32 {
        let mut out = vec![ZERO; out_len];
        for (i, x) in a.iter().enumerate() {
            if *x == ZERO {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        return out;
    }
    let len = out_len.next_power_of_two();
    let mut fa = vec![ZERO; len];
    let mut fb = vec![ZERO; len];
    fa[..a.len()].copy_from_slice(a);
    fb[..b.len()].copy_from_slice(b);
    fft_in_place(&mut fa, false);
    fft_in_place(&mut fb, false);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    fft_in_place(&mut fa, true);
    let s = 1.0 / len as f64;
    fa.truncate(out_len);
    fa.iter_mut().for_each(|x| *x *= s);
    fa
}

/// Matrix exponential.
pub fn expm(m: &CMat) -> CMat {
    m.exp()
}
