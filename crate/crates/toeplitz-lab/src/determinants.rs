//! Finite Toeplitz determinants, the Szegő constants, regularized determinants and the
//! higher-order remainder columns.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::factorization::FactorPair;
use crate::linalg::{
    expm, lu_log_det, matmul, max_abs, nearest_branch, trace, trace_of_product, wrap_angle, CMat, C64, ONE, ZERO,
};
use crate::operators::{correction_f_stack, correction_g_stack, exact_cutoff, hankel_product, toeplitz_matrix, OpTruncation};
use crate::regularity::{tail_sums, CharFunction};
use crate::symbols::{default_grid, FourierSymbol};

/// Sizes up to which every `n` is also checked by a direct LU factorization.
pub const LU_CHECK_LIMIT: usize = 64;
/// Largest matrix handled by the eigenvalue route of [`regularized_det`].
pub const EIGEN_LIMIT: usize = 256;

#[derive(Clone, Debug, Serialize)]
pub struct LuCheck {
    pub n: usize,
    pub min_pivot: f64,
    pub max_pivot: f64,
    /// `|exp(recursive − direct) − 1|`; `None` when the recursion had no value at `n`.
    pub rel_diff: Option<f64>,
}

/// `log det T_n(a)` for `n = 0..=n_max` with a branch that moves continuously in `n`.
#[derive(Clone, Debug, Serialize)]
pub struct LogDetSeries {
    pub values: Vec<Option<C64>>,
    /// Sizes where `T_n(a)` was numerically singular.
    pub gaps: Vec<usize>,
    pub checks: Vec<LuCheck>,
    /// First `n` handled by per-size LU after the recursion broke down.
    pub fallback_from: Option<usize>,
}

impl LogDetSeries {
    pub fn n_max(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn at(&self, n: usize) -> Option<C64> {
        self.values.get(n).copied().flatten()
    }

    /// Largest `|exp(recursive − direct) − 1|` over the LU checks.
    pub fn max_check_error(&self) -> f64 {
        self.checks.iter().filter_map(|c| c.rel_diff).fold(0.0, f64::max)
    }

    /// Replaces the values at `ns` by direct LU, keeping the branch of the series.
    pub fn refine(&mut self, a: &FourierSymbol, ns: &[usize]) {
        let fresh: Vec<(usize, LuCheck, Option<C64>)> = ns
            .par_iter()
            .filter(|&&n| n <= self.n_max() && !self.checks.iter().any(|c| c.n == n))
            .map(|&n| {
                let lu = lu_log_det(toeplitz_matrix(a, n));
                let reference = self.at(n);
                let value = lu.log_det.map(|z| match reference {
                    Some(r) => nearest_branch(z, r.im),
                    None => z,
                });
                let rel_diff = match (value, reference) {
                    (Some(v), Some(r)) => Some(((r - v).exp() - ONE).norm()),
                    _ => None,
                };
                (n, LuCheck { n, min_pivot: lu.min_pivot, max_pivot: lu.max_pivot, rel_diff }, value)
            })
            .collect();
        for (n, check, value) in fresh {
            match value {
                Some(v) => self.values[n] = Some(v),
                None => {
                    self.values[n] = None;
                    if !self.gaps.contains(&n) {
                        self.gaps.push(n);
                    }
                }
            }
            self.checks.push(check);
        }
        self.gaps.sort_unstable();
        self.checks.sort_by_key(|c| c.n);
    }
}

fn small_inverse(m: &CMat, scale: f64) -> Option<CMat> {
    let lu = lu_log_det(m.clone());
    if lu.log_det.is_none() || !(lu.min_pivot > 1e-13 * scale) {
        return None;
    }
    m.clone().try_inverse()
}

/// Block Levinson recursion; stops at the first singular leading section.
fn levinson(a: &FourierSymbol, n_max: usize) -> Vec<C64> {
    let dim = a.dim();
    let band = a.band() as i64;
    let scale = (-band..=band).filter_map(|k| a.coeff_ref(k)).map(max_abs).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let a0 = a.coeff(0);
    let mut out = Vec::with_capacity(n_max + 1);
    let Some(l0) = lu_log_det(a0.clone()).log_det else {
        return out;
    };
    out.push(l0);
    let id = CMat::identity(dim, dim);
    let mut x = vec![id.clone()];
    let mut y = vec![id.clone()];
    let (mut e, mut f) = (a0.clone(), a0);
    for n in 0..n_max {
        let (Some(e_inv), Some(f_inv)) = (small_inverse(&e, scale), small_inverse(&f, scale)) else {
            break;
        };
        let mut delta = CMat::zeros(dim, dim);
        for (k, xk) in x.iter().enumerate() {
            if let Some(ak) = a.coeff_ref((n + 1 - k) as i64) {
                delta += ak * xk;
            }
        }
        let mut nabla = CMat::zeros(dim, dim);
        for (k, yk) in y.iter().enumerate().take(band as usize) {
            if let Some(ak) = a.coeff_ref(-(k as i64) - 1) {
                nabla += ak * yk;
            }
        }
        let gx = &f_inv * &delta;
        let gy = &e_inv * &nabla;
        let mut x_new = Vec::with_capacity(n + 2);
        let mut y_new = Vec::with_capacity(n + 2);
        for k in 0..=n + 1 {
            let xk = x.get(k);
            let yk = if k == 0 { None } else { y.get(k - 1) };
            let xv = match (xk, yk) {
                (Some(u), Some(v)) => u - v * &gx,
                (Some(u), None) => u.clone(),
                (None, Some(v)) => -(v * &gx),
                (None, None) => unreachable!(),
            };
            let yv = match (yk, xk) {
                (Some(v), Some(u)) => v - u * &gy,
                (Some(v), None) => v.clone(),
                (None, Some(u)) => -(u * &gy),
                (None, None) => unreachable!(),
            };
            x_new.push(xv);
            y_new.push(yv);
        }
        e -= &nabla * &gx;
        f -= &delta * &gy;
        x = x_new;
        y = y_new;
        let Some(step) = lu_log_det(f.clone()).log_det else {
            break;
        };
        let prev = out[n];
        out.push(prev + step);
    }
    out
}

/// `log det T_n(a)` for every `n <= n_max`.
///
/// Values come from a block Levinson recursion and are replaced by direct LU for
/// `n <= LU_CHECK_LIMIT`; after a breakdown each size is factorized directly.
pub fn log_det_sequence(a: &FourierSymbol, n_max: usize) -> LogDetSeries {
    let lev = levinson(a, n_max);
    let mut values: Vec<Option<C64>> = lev.iter().copied().map(Some).collect();
    let mut gaps = Vec::new();
    let fallback_from = if values.len() <= n_max { Some(values.len()) } else { None };
    if let Some(start) = fallback_from {
        let mut last = values.last().copied().flatten();
        for n in start..=n_max {
            let lu = lu_log_det(toeplitz_matrix(a, n));
            let v = lu.log_det.map(|z| match last {
                Some(r) => nearest_branch(z, r.im),
                None => z,
            });
            if v.is_none() {
                gaps.push(n);
            } else {
                last = v;
            }
            values.push(v);
        }
    }
    let mut series = LogDetSeries { values, gaps, checks: Vec::new(), fallback_from };
    let small: Vec<usize> = (0..=n_max.min(LU_CHECK_LIMIT)).collect();
    series.refine(a, &small);
    series
}

/// `log G(a)`: the mean of a continuous branch of `log det a`.
pub fn log_geometric_mean(a: &FourierSymbol) -> Result<C64> {
    let grid = default_grid(a.band());
    let log = a.continuous_log_det(grid)?;
    if log.winding != 0 {
        return Err(LabError::NonzeroWinding(log.winding));
    }
    Ok(log.values.iter().sum::<C64>() / grid as f64)
}

pub fn geometric_mean(a: &FourierSymbol) -> Result<C64> {
    Ok(log_geometric_mean(a)?.exp())
}

fn trace_power(k: &CMat, i: usize) -> C64 {
    match i {
        0 => C64::new(k.nrows() as f64, 0.0),
        1 => trace(k),
        2 => trace_of_product(k, k),
        _ => {
            let half = i / 2;
            let mut p = k.clone();
            for _ in 1..half {
                p = matmul(&p, k);
            }
            if i % 2 == 0 {
                trace_of_product(&p, &p)
            } else {
                let q = matmul(&p, k);
                trace_of_product(&p, &q)
            }
        }
    }
}

/// `Σ_{j=1}^{J} tr(S^j)/j`.
fn log_series_traces(s: &CMat, terms: usize) -> C64 {
    (1..=terms).map(|j| trace_power(s, j) / j as f64).sum()
}

/// `log det_m(I+K)`, with the imaginary part wrapped into (−π, π].
pub fn log_regularized_det_matrix(k: &CMat, m: usize) -> Result<C64> {
    if m == 0 {
        return Err(LabError::InvalidArgument("det_m needs m >= 1".into()));
    }
    let n = k.nrows();
    if n != k.ncols() {
        return Err(LabError::InvalidArgument("det_m needs a square matrix".into()));
    }
    let total = if n <= EIGEN_LIMIT {
        let eig = crate::linalg::eigenvalues(k)?;
        let mut acc = ZERO;
        for l in eig {
            let z = ONE + l;
            if z == ZERO {
                return Err(LabError::SingularDeterminant("I + K has eigenvalue 0".into()));
            }
            acc += z.ln();
            let mut pw = ONE;
            for i in 1..m {
                pw *= -l;
                acc += pw / i as f64;
            }
        }
        acc
    } else {
        let lu = lu_log_det(CMat::identity(n, n) + k);
        let base = lu.log_det.ok_or_else(|| LabError::SingularDeterminant("I + K is singular".into()))?;
        let neg = -k;
        base + log_series_traces(&neg, m - 1)
    };
    Ok(C64::new(total.re, wrap_angle(total.im)))
}

/// `det_m(I+K) = det(I+K) exp(Σ_{i<m} tr((−K)^i)/i)`.
pub fn regularized_det(k: &OpTruncation, m: usize) -> Result<C64> {
    match log_regularized_det_matrix(&k.matrix, m) {
        Ok(l) => Ok(l.exp()),
        Err(LabError::SingularDeterminant(_)) => Ok(ZERO),
        Err(e) => Err(e),
    }
}

/// `det(I + R_m(K))` with `R_m(K) = (I+K) exp(Σ_{j<m}(−K)^j/j) − I`, through a dense exponential.
pub fn regularized_det_direct(k: &OpTruncation, m: usize) -> Result<C64> {
    if m == 0 {
        return Err(LabError::InvalidArgument("det_m needs m >= 1".into()));
    }
    let n = k.matrix.nrows();
    let id = CMat::identity(n, n);
    let neg = -&k.matrix;
    let mut series = CMat::zeros(n, n);
    let mut pw = id.clone();
    for j in 1..m {
        pw = matmul(&pw, &neg);
        series += &pw / C64::new(j as f64, 0.0);
    }
    let full = matmul(&(&id + &k.matrix), &expm(&series));
    Ok(full.determinant())
}

/// `Σ_{k>=1} k c_k c_{-k}` for the log coefficients `c`.
pub fn strong_szego_log(logs: &FourierSymbol) -> C64 {
    (1..=logs.band() as i64).map(|k| logs.scalar_coeff(k) * logs.scalar_coeff(-k) * k as f64).sum()
}

/// `tr H(c̃)H(b) = Σ_{s>=1} s tr(c_{-s} b_s)`.
pub fn trace_hankel_product(c: &FourierSymbol, b: &FourierSymbol) -> C64 {
    let top = c.band().min(b.band()) as i64;
    (1..=top)
        .filter_map(|s| Some(trace(&(c.coeff_ref(-s)? * b.coeff_ref(s)?)) * s as f64))
        .sum()
}

/// `tr F_{n,0} = Σ_{d>=1} min(d, n+1) tr(c_{-d} b_d)`.
pub fn trace_correction_f0(b: &FourierSymbol, c: &FourierSymbol, n: usize) -> C64 {
    let top = c.band().min(b.band()) as i64;
    (1..=top)
        .filter_map(|d| Some(trace(&(c.coeff_ref(-d)? * b.coeff_ref(d)?)) * (d as f64).min(n as f64 + 1.0)))
        .sum()
}

/// `log det₁ T(a)T(a⁻¹)` on an `M`-mode truncation.
pub fn log_e1_truncated(a: &FourierSymbol, modes: usize) -> Result<C64> {
    let inv = a.inverse(modes + a.band() + 1)?;
    let inner = a.band().clamp(1, modes);
    let x = hankel_product(a, &inv.tilde(), modes, inner);
    log_regularized_det_matrix(&(-x), 1)
}

/// `log det₁ T(c̃)T(b̃)` on an `M`-mode truncation.
pub fn log_dual_truncated(pair: &FactorPair, modes: usize) -> Result<C64> {
    let k = hankel_product(&pair.c.tilde(), &pair.b, modes, modes);
    log_regularized_det_matrix(&(-k), 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ConstantSource {
    /// `Σ k c_k c_{-k}` from the log coefficients.
    ClosedForm,
    Truncation,
}

#[derive(Clone, Debug, Serialize)]
pub struct SzegoConstants {
    pub g: C64,
    pub log_g: C64,
    pub e1: C64,
    pub log_e1: C64,
    pub source: ConstantSource,
    /// Truncated `log E₁` at `M` and `2M`, when computed.
    pub truncated_log_e1: Vec<(usize, C64)>,
    /// `log det₁ T(c̃)T(b̃)` at `M` and `2M`.
    pub dual_log_det: Vec<(usize, C64)>,
    /// `|E₁ det₁(T(c̃)T(b̃)) − 1|` at `M`.
    pub duality_defect: f64,
    /// Largest change of a truncated log under `M → 2M`.
    pub doubling_delta: f64,
    pub stable: bool,
}

impl SzegoConstants {
    pub fn require_stable(&self) -> Result<()> {
        if self.stable {
            Ok(())
        } else {
            Err(LabError::UnstableConstant { delta: self.doubling_delta })
        }
    }
}

/// Scalar symbols with at most this many coefficients per side also get a truncated `E₁`.
const TRUNCATED_E1_BAND: usize = 256;
pub const CONSTANT_TOL: f64 = 1e-6;

/// `G(a)` and `E₁ = det₁ T(a)T(a⁻¹)`, with the dual determinant and an `M`-doubling check.
pub fn szego_constant(a: &FourierSymbol, pair: &FactorPair, modes: usize) -> Result<SzegoConstants> {
    if modes < 128 {
        return Err(LabError::InvalidArgument(format!("Szegő constants need M >= 128, got {modes}")));
    }
    if a.dim() != pair.dim() {
        return Err(LabError::BlockSizeMismatch(a.dim(), pair.dim()));
    }
    let log_g = log_geometric_mean(a)?;
    let closed = match (&pair.log_coeffs, a.is_scalar()) {
        (Some(logs), true) => Some(strong_szego_log(logs)),
        _ => None,
    };
    let doubled = [modes, 2 * modes];
    let truncated_log_e1: Vec<(usize, C64)> = if closed.is_none() || a.band() <= TRUNCATED_E1_BAND {
        let vals = doubled.par_iter().map(|&m| log_e1_truncated(a, m)).collect::<Result<Vec<_>>>()?;
        doubled.iter().copied().zip(vals).collect()
    } else {
        Vec::new()
    };
    let mut dual: Vec<(usize, C64)> = {
        let vals = doubled.par_iter().map(|&m| log_dual_truncated(pair, m)).collect::<Result<Vec<_>>>()?;
        doubled.iter().copied().zip(vals).collect()
    };
    let mut trunc = truncated_log_e1;
    unwrap_along(&mut dual);
    unwrap_along(&mut trunc);
    let (log_e1, source) = match closed {
        Some(v) => (v, ConstantSource::ClosedForm),
        None => (trunc[0].1, ConstantSource::Truncation),
    };
    let step = |v: &[(usize, C64)]| if v.len() == 2 { (v[1].1 - v[0].1).norm() } else { 0.0 };
    let doubling_delta = step(&dual).max(step(&trunc));
    let duality_defect = ((log_e1 + dual[0].1).exp() - ONE).norm();
    Ok(SzegoConstants {
        g: log_g.exp(),
        log_g,
        e1: log_e1.exp(),
        log_e1,
        source,
        truncated_log_e1: trunc,
        dual_log_det: dual,
        duality_defect,
        doubling_delta,
        stable: doubling_delta <= CONSTANT_TOL,
    })
}

fn unwrap_along(v: &mut [(usize, C64)]) {
    for i in 1..v.len() {
        let r = v[i - 1].1.im;
        v[i].1 = nearest_branch(v[i].1, r);
    }
}

/// Largest Hankel-product size used for `tr (H(c̃)H(b))^i`, `i >= 2`.
pub const DUAL_TRACE_CAP: usize = 4096;

/// `log det_m T(c̃)T(b̃) = −log E₁ + Σ_{i<m} tr(K^i)/i` with `K = H(c̃)H(b)`.
///
/// `tr K` is summed from coefficients; higher traces use the `S×S` corner of `K` with
/// `S = min(band b, band c)`, which holds every contributing entry, capped at `cap`.
pub fn log_det_m_dual(pair: &FactorPair, log_e1: C64, m: usize, cap: usize) -> Result<C64> {
    if m == 0 {
        return Err(LabError::InvalidArgument("det_m needs m >= 1".into()));
    }
    let mut acc = -log_e1;
    if m >= 2 {
        acc += trace_hankel_product(&pair.c, &pair.b);
    }
    if m >= 3 {
        let tol = 1e-16 * (max_abs(&pair.b.coeff(0)) + max_abs(&pair.c.coeff(0))).max(1.0);
        let (b, c) = (pair.b.trimmed(tol), pair.c.trimmed(tol));
        let size = b.band().min(c.band()).clamp(1, cap);
        let k = hankel_product(&c.tilde(), &b, size, size);
        for i in 2..m {
            acc += trace_power(&k, i) / i as f64;
        }
    }
    Ok(acc)
}

#[derive(Clone, Debug, Serialize)]
pub struct RemainderRow {
    pub n: usize,
    pub log_det: Option<C64>,
    /// `log det T_n − (n+1) log G − log E₁`.
    pub widom: Option<C64>,
    /// Remainder after the full correction `Σ_{k<m} F_{n,k}`.
    pub ho_c: Option<C64>,
    /// Same with `F_{n,m−1}` dropped; absent for `m = 1`.
    pub ho_d: Option<C64>,
    /// `log det T_n − (n+1) log G − Σ_{ℓ<=n}` (cumulative `G_{ℓ,k}` terms).
    pub ho_e: Option<C64>,
    pub tail: f64,
    /// `|primary remainder| / tail`; primary is `widom` for `m = 1`, else `ho_c`.
    pub ratio: Option<f64>,
    pub trace_f_last: Option<C64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HoExpansion {
    pub m: usize,
    pub rows: Vec<RemainderRow>,
    /// Median of `ho_e` over the last quartile of the schedule.
    pub log_e_intercept: Option<C64>,
    pub intercept_spread: f64,
    pub log_det_m_dual: C64,
}

/// `Σ_{j=1}^{m−1} tr(S^j)/j` with `S = Σ_{k<kk} F_k`.
fn correction_sum(stack: &[CMat], kk: usize, m: usize) -> C64 {
    if kk == 0 || m < 2 {
        return ZERO;
    }
    let mut s = stack[0].clone();
    for f in &stack[1..kk] {
        s += f;
    }
    log_series_traces(&s, m - 1)
}

/// `tr Σ_{j=1}^{m−1} (1/j) (Σ_{k=0}^{m−j−1} G_k)^j` for one `ℓ`.
fn g_term(stack: &[CMat], m: usize) -> C64 {
    let mut acc = ZERO;
    for j in 1..m {
        let mut s = stack[0].clone();
        for g in &stack[1..m - j] {
            s += g;
        }
        acc += trace_power(&s, j) / j as f64;
    }
    acc
}

/// Median of real and imaginary parts separately.
fn complex_median(v: &[C64]) -> C64 {
    let med = |mut x: Vec<f64>| {
        x.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let n = x.len();
        if n % 2 == 1 {
            x[n / 2]
        } else {
            0.5 * (x[n / 2 - 1] + x[n / 2])
        }
    };
    C64::new(med(v.iter().map(|z| z.re).collect()), med(v.iter().map(|z| z.im).collect()))
}

/// The remainder columns for every `n` in `schedule`.
#[allow(clippy::too_many_arguments)]
pub fn ho_remainders(
    series: &LogDetSeries,
    consts: &SzegoConstants,
    pair: &FactorPair,
    w: &CharFunction,
    p: &CharFunction,
    m: usize,
    schedule: &[usize],
) -> Result<HoExpansion> {
    if m == 0 {
        return Err(LabError::InvalidArgument("m must be >= 1".into()));
    }
    if let Some(&bad) = schedule.iter().find(|&&n| n > series.n_max()) {
        return Err(LabError::InvalidArgument(format!("n = {bad} exceeds the determinant series")));
    }
    // Trailing coefficients below roundoff only widen the correction sections.
    let tol = 1e-17 * (max_abs(&pair.b.coeff(0)) + max_abs(&pair.c.coeff(0))).max(1.0);
    let (b, c) = (&pair.b.trimmed(tol), &pair.c.trimmed(tol));
    let log_dm = log_det_m_dual(pair, consts.log_e1, m, DUAL_TRACE_CAP)?;
    let tails = tail_sums(w, p, m as u32, schedule);
    let top = schedule.iter().copied().max().unwrap_or(0);
    let g_terms: Vec<C64> = if m >= 2 {
        (1..=top)
            .into_par_iter()
            .map(|ell| Ok(g_term(&correction_g_stack(b, c, ell, m - 2, exact_cutoff(b, c, ell))?, m)))
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![ZERO; top]
    };
    let mut cumulative = vec![ZERO; top + 1];
    for ell in 1..=top {
        cumulative[ell] = cumulative[ell - 1] + g_terms[ell - 1];
    }
    let log_g = consts.log_g;
    let rows = schedule
        .par_iter()
        .zip(tails.par_iter())
        .map(|(&n, tail)| {
            let stack = if m == 1 { Vec::new() } else { correction_f_stack(b, c, n, m - 1, exact_cutoff(b, c, n))? };
            let ld = series.at(n);
            let base = ld.map(|l| l - log_g * (n + 1) as f64);
            let near0 = |z: C64| nearest_branch(z, 0.0);
            let widom = base.map(|x| near0(x - consts.log_e1));
            let (ho_c, ho_d) = if m == 1 {
                (widom, None)
            } else {
                let full = correction_sum(&stack, m, m);
                let short = correction_sum(&stack, m - 1, m);
                (base.map(|x| near0(x - full + log_dm)), base.map(|x| near0(x - short + log_dm)))
            };
            let ho_e = base.map(|x| x - cumulative[n]);
            let primary = if m == 1 { widom } else { ho_c };
            let ratio = match (primary, tail.convergent && tail.value > 0.0) {
                (Some(r), true) => Some(r.norm() / tail.value),
                _ => None,
            };
            Ok(RemainderRow {
                n,
                log_det: ld,
                widom,
                ho_c,
                ho_d,
                ho_e,
                tail: tail.value,
                ratio,
                trace_f_last: Some(if m == 1 { trace_correction_f0(b, c, n) } else { trace(&stack[m - 1]) }),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sorted: Vec<&RemainderRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.n);
    let window = sorted.len().div_ceil(4);
    let last: Vec<C64> = sorted[sorted.len() - window..].iter().filter_map(|r| r.ho_e).collect();
    let (log_e_intercept, intercept_spread) = if last.is_empty() {
        (None, f64::NAN)
    } else {
        let med = complex_median(&last);
        let mut med_b = med;
        // Align the branch with log E₁ so the two are comparable.
        med_b = nearest_branch(med_b, consts.log_e1.im);
        let spread = last.iter().map(|z| (nearest_branch(*z, med_b.im) - med_b).norm()).fold(0.0, f64::max);
        (Some(med_b), spread)
    };
    Ok(HoExpansion { m, rows, log_e_intercept, intercept_spread, log_det_m_dual: log_dm })
}
