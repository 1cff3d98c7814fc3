//! Matrix-valued Laurent symbols on the unit circle.
//!
//! A [`FourierSymbol`] stores the coefficients `a_k`, `|k| <= K`, as dense
//! `N×N` complex blocks. Non-polynomial symbols enter through
//! [`FourierSymbol::from_samples`], which truncates to a chosen band.

use std::f64::consts::PI;

use crate::error::{LabError, Result};
use crate::linalg::{convolve, fft_in_place, max_abs, CMat, C64, ONE, ZERO};

/// Smallest grid used for phase unwrapping.
pub const MIN_PHASE_GRID: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct FourierSymbol {
    dim: usize,
    band: usize,
    /// `coeffs[k + band]` holds `a_k`.
    coeffs: Vec<CMat>,
    sample_grid: Option<usize>,
}

/// Display norm for blocks: `N` times the largest entry modulus, so `‖I‖ = N`.
pub fn block_norm(m: &CMat) -> f64 {
    m.nrows() as f64 * max_abs(m)
}

impl FourierSymbol {
    /// Builds a symbol from `(k, a_k)` pairs; repeated indices are summed.
    pub fn new(dim: usize, entries: Vec<(i64, CMat)>) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::InvalidArgument("block size must be positive".into()));
        }
        let band = entries.iter().map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0);
        let mut coeffs = vec![CMat::zeros(dim, dim); 2 * band + 1];
        for (k, m) in entries {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(LabError::BlockSizeMismatch(dim, m.nrows().max(m.ncols())));
            }
            coeffs[(k + band as i64) as usize] += m;
        }
        Ok(Self { dim, band, coeffs, sample_grid: None })
    }

    /// Builds a symbol from a dense coefficient vector indexed `k + band`.
    pub fn from_dense(dim: usize, band: usize, coeffs: Vec<CMat>) -> Result<Self> {
        if coeffs.len() != 2 * band + 1 {
            return Err(LabError::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                2 * band + 1,
                coeffs.len()
            )));
        }
        if let Some(m) = coeffs.iter().find(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(LabError::BlockSizeMismatch(dim, m.nrows()));
        }
        Ok(Self { dim, band, coeffs, sample_grid: None })
    }

    pub fn scalar(entries: &[(i64, C64)]) -> Self {
        let list = entries.iter().map(|&(k, z)| (k, CMat::from_element(1, 1, z))).collect();
        Self::new(1, list).expect("scalar blocks are 1x1")
    }

    pub fn scalar_real(entries: &[(i64, f64)]) -> Self {
        let list: Vec<(i64, C64)> = entries.iter().map(|&(k, x)| (k, C64::new(x, 0.0))).collect();
        Self::scalar(&list)
    }

    /// Scalar symbol from a coefficient sequence indexed `k + band`.
    pub fn scalar_dense(band: usize, coeffs: Vec<C64>) -> Result<Self> {
        let blocks = coeffs.into_iter().map(|z| CMat::from_element(1, 1, z)).collect();
        Self::from_dense(1, band, blocks)
    }

    pub fn constant(m: CMat) -> Self {
        let dim = m.nrows();
        Self { dim, band: 0, coeffs: vec![m], sample_grid: None }
    }

    pub fn identity(dim: usize) -> Self {
        Self::constant(CMat::identity(dim, dim))
    }

    /// `t^k · I`.
    pub fn monomial(dim: usize, k: i64) -> Self {
        Self::new(dim, vec![(k, CMat::identity(dim, dim))]).expect("identity block")
    }

    /// The real lacunary series `A Σ_{j=1}^{L} 2^{-γj} cos(2^j θ)`.
    pub fn lacunary_series(amplitude: f64, gamma: f64, levels: u32) -> Self {
        let mut entries = Vec::new();
        for j in 1..=levels {
            let w = 0.5 * amplitude * 2f64.powf(-gamma * j as f64);
            let k = 1i64 << j;
            entries.push((k, w));
            entries.push((-k, w));
        }
        if entries.is_empty() {
            return Self::scalar_real(&[(0, 0.0)]);
        }
        Self::scalar_real(&entries)
    }

    /// `exp` of the lacunary series, truncated to `band`.
    pub fn exp_lacunary(amplitude: f64, gamma: f64, levels: u32, band: usize) -> Result<Self> {
        let w = Self::lacunary_series(amplitude, gamma, levels);
        w.exp_scalar(band)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn is_scalar(&self) -> bool {
        self.dim == 1
    }

    pub fn sample_grid(&self) -> Option<usize> {
        self.sample_grid
    }

    pub fn coeff_ref(&self, k: i64) -> Option<&CMat> {
        if k.unsigned_abs() as usize > self.band {
            None
        } else {
            Some(&self.coeffs[(k + self.band as i64) as usize])
        }
    }

    pub fn coeff(&self, k: i64) -> CMat {
        self.coeff_ref(k).cloned().unwrap_or_else(|| CMat::zeros(self.dim, self.dim))
    }

    /// Entry `(α, β)` of `a_k`, zero outside the band.
    pub fn entry_coeff(&self, k: i64, alpha: usize, beta: usize) -> C64 {
        self.coeff_ref(k).map_or(ZERO, |m| m[(alpha, beta)])
    }

    /// `a_k` of a scalar symbol.
    pub fn scalar_coeff(&self, k: i64) -> C64 {
        self.entry_coeff(k, 0, 0)
    }

    /// Entry `(α, β)` as a scalar symbol.
    pub fn entry(&self, alpha: usize, beta: usize) -> Self {
        let c = self.coeffs.iter().map(|m| CMat::from_element(1, 1, m[(alpha, beta)])).collect();
        Self { dim: 1, band: self.band, coeffs: c, sample_grid: self.sample_grid }
    }

    /// Entry sequence `(α, β)` indexed `k + band`.
    pub fn entry_sequence(&self, alpha: usize, beta: usize) -> Vec<C64> {
        self.coeffs.iter().map(|m| m[(alpha, beta)]).collect()
    }

    /// Smallest and largest index whose coefficient exceeds `tol` in modulus.
    pub fn support(&self, tol: f64) -> Option<(i64, i64)> {
        let idx: Vec<i64> = (0..self.coeffs.len())
            .filter(|&i| max_abs(&self.coeffs[i]) > tol)
            .map(|i| i as i64 - self.band as i64)
            .collect();
        Some((*idx.first()?, *idx.last()?))
    }

    /// Largest entry modulus over coefficients with index in `range`.
    pub fn max_coeff_in(&self, range: std::ops::RangeInclusive<i64>) -> f64 {
        range.filter_map(|k| self.coeff_ref(k)).map(max_abs).fold(0.0, f64::max)
    }

    /// Largest entry difference over the union of both bands.
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        let band = self.band.max(other.band) as i64;
        (-band..=band)
            .map(|k| max_abs(&(self.coeff(k) - other.coeff(k))))
            .fold(0.0, f64::max)
    }

    /// Same symbol with coefficients outside `|k| <= band` dropped (or zero-padded).
    pub fn truncate(&self, band: usize) -> Self {
        let coeffs = (-(band as i64)..=band as i64).map(|k| self.coeff(k)).collect();
        Self { dim: self.dim, band, coeffs, sample_grid: self.sample_grid }
    }

    /// Drops outer coefficients whose entries are all at most `tol`.
    pub fn trimmed(&self, tol: f64) -> Self {
        let mut band = self.band;
        while band > 0 {
            let lo = self.coeff_ref(-(band as i64)).map_or(0.0, max_abs);
            let hi = self.coeff_ref(band as i64).map_or(0.0, max_abs);
            if lo > tol || hi > tol {
                break;
            }
            band -= 1;
        }
        self.truncate(band)
    }

    /// Keeps only coefficients with index in `range`.
    pub fn restrict(&self, range: std::ops::RangeInclusive<i64>) -> Self {
        let mut out = self.clone();
        for k in -(self.band as i64)..=self.band as i64 {
            if !range.contains(&k) {
                out.coeffs[(k + self.band as i64) as usize].fill(ZERO);
            }
        }
        out
    }

    /// Sum of the entry moduli of all coefficients outside `range`.
    pub fn mass_outside(&self, range: std::ops::RangeInclusive<i64>) -> f64 {
        (-(self.band as i64)..=self.band as i64)
            .filter(|k| !range.contains(k))
            .map(|k| self.coeffs[(k + self.band as i64) as usize].iter().map(|z| z.norm()).sum::<f64>())
            .sum()
    }

    pub fn eval(&self, theta: f64) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for (i, m) in self.coeffs.iter().enumerate() {
            let k = i as f64 - self.band as f64;
            out += m * C64::from_polar(1.0, k * theta);
        }
        out
    }

    /// Values `a(θ_j)`, `θ_j = 2πj/grid`, computed by FFT (exact for any grid size).
    pub fn samples(&self, grid: usize) -> Vec<CMat> {
        let mut out = vec![CMat::zeros(self.dim, self.dim); grid];
        for alpha in 0..self.dim {
            for beta in 0..self.dim {
                let vals = sample_sequence(&self.entry_sequence(alpha, beta), self.band, grid);
                for (j, v) in vals.into_iter().enumerate() {
                    out[j][(alpha, beta)] = v;
                }
            }
        }
        out
    }

    /// Values of a scalar symbol on the grid.
    pub fn scalar_samples(&self, grid: usize) -> Vec<C64> {
        sample_sequence(&self.entry_sequence(0, 0), self.band, grid)
    }

    /// Coefficients `|k| <= band` of the trigonometric interpolant of grid samples.
    pub fn from_samples(values: &[CMat], band: usize) -> Result<Self> {
        let grid = values.len();
        check_grid(grid, band)?;
        let dim = values[0].nrows();
        if let Some(m) = values.iter().find(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(LabError::BlockSizeMismatch(dim, m.nrows()));
        }
        let mut coeffs = vec![CMat::zeros(dim, dim); 2 * band + 1];
        for alpha in 0..dim {
            for beta in 0..dim {
                let vals: Vec<C64> = values.iter().map(|m| m[(alpha, beta)]).collect();
                let seq = coefficients_from_values(vals, band);
                for (i, z) in seq.into_iter().enumerate() {
                    coeffs[i][(alpha, beta)] = z;
                }
            }
        }
        Ok(Self { dim, band, coeffs, sample_grid: Some(grid) })
    }

    pub fn from_scalar_samples(values: &[C64], band: usize) -> Result<Self> {
        check_grid(values.len(), band)?;
        let seq = coefficients_from_values(values.to_vec(), band);
        let mut s = Self::scalar_dense(band, seq)?;
        s.sample_grid = Some(values.len());
        Ok(s)
    }

    /// Pointwise map of a scalar symbol on a grid, re-expanded at `band`.
    pub fn map_scalar(&self, band: usize, grid: usize, f: impl Fn(C64) -> C64) -> Result<Self> {
        self.require_scalar()?;
        let vals: Vec<C64> = self.scalar_samples(grid).into_iter().map(f).collect();
        Self::from_scalar_samples(&vals, band)
    }

    /// `exp` of a scalar symbol at `band`.
    pub fn exp_scalar(&self, band: usize) -> Result<Self> {
        let grid = default_grid(self.band.max(band));
        self.map_scalar(band, grid, |z| z.exp())
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(LabError::BlockSizeMismatch(self.dim, other.dim));
        }
        let n = self.dim;
        let band = self.band + other.band;
        let mut coeffs = vec![CMat::zeros(n, n); 2 * band + 1];
        for alpha in 0..n {
            for beta in 0..n {
                for gamma in 0..n {
                    let x = self.entry_sequence(alpha, gamma);
                    let y = other.entry_sequence(gamma, beta);
                    if x.iter().all(|z| *z == ZERO) || y.iter().all(|z| *z == ZERO) {
                        continue;
                    }
                    for (i, z) in convolve(&x, &y).into_iter().enumerate() {
                        coeffs[i][(alpha, beta)] += z;
                    }
                }
            }
        }
        Ok(Self { dim: n, band, coeffs, sample_grid: None })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(LabError::BlockSizeMismatch(self.dim, other.dim));
        }
        let band = self.band.max(other.band);
        let coeffs = (-(band as i64)..=band as i64).map(|k| self.coeff(k) + other.coeff(k)).collect();
        Ok(Self { dim: self.dim, band, coeffs, sample_grid: None })
    }

    pub fn scale(&self, s: C64) -> Self {
        let coeffs = self.coeffs.iter().map(|m| m * s).collect();
        Self { dim: self.dim, band: self.band, coeffs, sample_grid: self.sample_grid }
    }

    /// `a - λ I`.
    pub fn shift_by(&self, lambda: C64) -> Self {
        let mut out = self.clone();
        out.coeffs[self.band] -= CMat::identity(self.dim, self.dim) * lambda;
        out
    }

    /// Pointwise inverse on a grid, re-expanded at `band_out`.
    pub fn inverse(&self, band_out: usize) -> Result<Self> {
        let grid = default_grid(self.band.max(band_out));
        self.inverse_on_grid(band_out, grid)
    }

    pub fn inverse_on_grid(&self, band_out: usize, grid: usize) -> Result<Self> {
        check_grid(grid, band_out)?;
        if self.dim == 1 {
            let vals = self.scalar_samples(grid);
            let scale = vals.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1.0);
            let min = vals.iter().fold(f64::INFINITY, |m, z| m.min(z.norm()));
            if !(min > 1e-13 * scale) {
                return Err(LabError::SingularSymbol { min_det: min });
            }
            let inv: Vec<C64> = vals.iter().map(|z| ONE / z).collect();
            return Self::from_scalar_samples(&inv, band_out);
        }
        let mut vals = self.samples(grid);
        let mut min_det = f64::INFINITY;
        for v in vals.iter_mut() {
            let d = v.determinant().norm();
            min_det = min_det.min(d);
            if !(d > 1e-13) {
                return Err(LabError::SingularSymbol { min_det: d });
            }
            *v = v.clone().try_inverse().ok_or(LabError::SingularSymbol { min_det: d })?;
        }
        Self::from_samples(&vals, band_out)
    }

    /// Coefficient map `k ↦ a_{-k}`.
    pub fn tilde(&self) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.reverse();
        Self { dim: self.dim, band: self.band, coeffs, sample_grid: self.sample_grid }
    }

    /// `Σ_k ‖a_k‖_F² |k|`.
    pub fn krein_weight(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let k = (i as i64 - self.band as i64).unsigned_abs() as f64;
                k * m.iter().map(|z| z.norm_sqr()).sum::<f64>()
            })
            .sum()
    }

    /// Winding number of `det a` around 0 (for scalar symbols, of `a` itself).
    pub fn winding_number(&self) -> Result<i64> {
        Ok(self.continuous_log_det(default_grid(self.band))?.winding)
    }

    /// Samples of `det a` on the grid.
    pub fn det_samples(&self, grid: usize) -> Vec<C64> {
        if self.dim == 1 {
            self.scalar_samples(grid)
        } else {
            self.samples(grid).into_iter().map(|m| m.determinant()).collect()
        }
    }

    /// `log det a` on a grid with a continuous branch anchored at the principal value at θ = 0.
    pub fn continuous_log_det(&self, grid: usize) -> Result<ContinuousLog> {
        continuous_log(&self.det_samples(grid))
    }

    pub fn require_scalar(&self) -> Result<()> {
        if self.dim != 1 {
            return Err(LabError::InvalidArgument(format!(
                "operation needs a scalar symbol, got block size {}",
                self.dim
            )));
        }
        Ok(())
    }

    /// Rough size of the dropped tail: entry mass on the outer tenth of the band.
    pub fn tail_estimate(&self) -> f64 {
        let k = self.band as i64;
        let lo = k - (k / 10).max(1) + 1;
        if k == 0 {
            return 0.0;
        }
        (lo..=k)
            .map(|j| {
                self.coeff_ref(j).map_or(0.0, max_abs) + self.coeff_ref(-j).map_or(0.0, max_abs)
            })
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct ContinuousLog {
    /// `log|s_j| + i·φ_j` with φ continuous along the grid.
    pub values: Vec<C64>,
    pub winding: i64,
}

/// Unwraps the phase of closed-curve samples; adjacent jumps above π/2 mean the grid is too coarse.
pub fn continuous_log(samples: &[C64]) -> Result<ContinuousLog> {
    let scale = samples.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let min = samples.iter().fold(f64::INFINITY, |m, z| m.min(z.norm()));
    if samples.is_empty() || !(min > 1e-13 * scale.max(1e-300)) || !(min > 0.0) {
        return Err(LabError::SingularSymbol { min_det: if min.is_finite() { min } else { 0.0 } });
    }
    let mut values = Vec::with_capacity(samples.len());
    let mut phase = samples[0].arg();
    values.push(C64::new(samples[0].norm().ln(), phase));
    for w in samples.windows(2) {
        let step = (w[1] / w[0]).arg();
        if step.abs() > PI / 2.0 {
            return Err(LabError::UnderResolved { jump: step.abs() });
        }
        phase += step;
        values.push(C64::new(w[1].norm().ln(), phase));
    }
    let closing = (samples[0] / samples[samples.len() - 1]).arg();
    if closing.abs() > PI / 2.0 {
        return Err(LabError::UnderResolved { jump: closing.abs() });
    }
    let total = phase + closing - samples[0].arg();
    Ok(ContinuousLog { values, winding: (total / (2.0 * PI)).round() as i64 })
}

/// Power-of-two grid comfortably resolving a band.
pub fn default_grid(band: usize) -> usize {
    (8 * band + 2).next_power_of_two().max(MIN_PHASE_GRID)
}

fn check_grid(grid: usize, band: usize) -> Result<()> {
    if grid < 2 * band + 2 || !grid.is_power_of_two() {
        return Err(LabError::Aliasing { grid, band });
    }
    Ok(())
}

fn sample_sequence(seq: &[C64], band: usize, grid: usize) -> Vec<C64> {
    let mut buf = vec![ZERO; grid];
    for (i, z) in seq.iter().enumerate() {
        let k = i as i64 - band as i64;
        buf[k.rem_euclid(grid as i64) as usize] += z;
    }
    fft_in_place(&mut buf, true);
    buf
}

fn coefficients_from_values(mut vals: Vec<C64>, band: usize) -> Vec<C64> {
    let grid = vals.len();
    fft_in_place(&mut vals, false);
    let s = 1.0 / grid as f64;
    (-(band as i64)..=band as i64)
        .map(|k| vals[k.rem_euclid(grid as i64) as usize] * s)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiagonal() -> FourierSymbol {
        let a = FourierSymbol::scalar_real(&[(0, 1.0), (1, -0.5)]);
        let b = FourierSymbol::scalar_real(&[(0, 1.0), (-1, -0.3)]);
        a.multiply(&b).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(FourierSymbol::identity(2).eval(1.0), CMat::identity(2, 2));
        let cos2 = FourierSymbol::scalar_real(&[(1, 1.0), (-1, 1.0)]);
        assert!((cos2.eval(0.0)[(0, 0)] - C64::new(2.0, 0.0)).norm() < 1e-15);
        assert!((tridiagonal().eval(0.0)[(0, 0)] - C64::new(0.35, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn multiply_hand_convolution() {
        let a = tridiagonal();
        for (k, v) in [(-1, -0.3), (0, 1.15), (1, -0.5)] {
            assert!((a.scalar_coeff(k) - C64::new(v, 0.0)).norm() < 1e-15);
        }
        let t = FourierSymbol::monomial(1, 1);
        let p = t.multiply(&FourierSymbol::monomial(1, -1)).unwrap();
        assert_eq!(p.max_coeff_diff(&FourierSymbol::identity(1)), 0.0);
        assert!(a.multiply(&FourierSymbol::identity(1)).unwrap().max_coeff_diff(&a) == 0.0);
    }

    #[test]
    fn multiply_rejects_block_mismatch() {
        let e = FourierSymbol::identity(1).multiply(&FourierSymbol::identity(2));
        assert_eq!(e, Err(LabError::BlockSizeMismatch(1, 2)));
    }

    #[test]
    fn from_samples_examples() {
        let s = FourierSymbol::from_scalar_samples(&[C64::new(3.0, 0.0); 4], 0).unwrap();
        assert!((s.scalar_coeff(0) - C64::new(3.0, 0.0)).norm() < 1e-15);

        let vals: Vec<C64> = (0..8).map(|j| C64::from_polar(1.0, 2.0 * PI * j as f64 / 8.0)).collect();
        let s = FourierSymbol::from_scalar_samples(&vals, 1).unwrap();
        assert!((s.scalar_coeff(1) - ONE).norm() < 1e-14);
        assert!(s.scalar_coeff(0).norm() < 1e-14 && s.scalar_coeff(-1).norm() < 1e-14);

        // Fourier integral by brute-force quadrature at 10^4 nodes.
        let nodes = 10_000;
        let oracle: f64 = (0..nodes)
            .map(|j| {
                let th = 2.0 * PI * j as f64 / nodes as f64;
                (0.2 * th.cos()).exp() * th.cos()
            })
            .sum::<f64>()
            / nodes as f64;
        let vals: Vec<C64> = (0..64)
            .map(|j| C64::new((0.2 * (2.0 * PI * j as f64 / 64.0).cos()).exp(), 0.0))
            .collect();
        let s = FourierSymbol::from_scalar_samples(&vals, 16).unwrap();
        assert!((s.scalar_coeff(1).re - oracle).abs() < 1e-12);
        // Series value of I_1(0.2).
        assert!((s.scalar_coeff(1).re - 0.100500834).abs() < 1e-9);
    }

    #[test]
    fn from_samples_rejects_aliasing() {
        let vals = vec![ONE; 8];
        assert!(matches!(FourierSymbol::from_scalar_samples(&vals, 4), Err(LabError::Aliasing { .. })));
        let vals = vec![ONE; 12];
        assert!(matches!(FourierSymbol::from_scalar_samples(&vals, 2), Err(LabError::Aliasing { .. })));
    }

    #[test]
    fn inverse_examples() {
        let two = FourierSymbol::scalar_real(&[(0, 2.0)]);
        assert!((two.inverse(0).unwrap().scalar_coeff(0) - C64::new(0.5, 0.0)).norm() < 1e-14);

        let a = FourierSymbol::scalar_real(&[(0, 1.0), (1, -0.5)]);
        let inv = a.inverse(8).unwrap();
        for k in -8..=8i64 {
            let expect = if k >= 0 { 0.5f64.powi(k as i32) } else { 0.0 };
            assert!((inv.scalar_coeff(k) - C64::new(expect, 0.0)).norm() < 1e-13, "k={k}");
        }
        let id = FourierSymbol::identity(2).inverse(2).unwrap();
        assert!(id.max_coeff_diff(&FourierSymbol::identity(2)) < 1e-14);
    }

    #[test]
    fn inverse_rejects_vanishing_symbol() {
        let a = FourierSymbol::scalar_real(&[(0, 1.0), (1, -1.0)]);
        assert!(matches!(a.inverse(4), Err(LabError::SingularSymbol { .. })));
    }

    #[test]
    fn tilde_examples() {
        let t = FourierSymbol::monomial(1, 1);
        assert_eq!(t.tilde(), FourierSymbol::monomial(1, -1));
        let a = tridiagonal().tilde();
        for (k, v) in [(1, -0.3), (0, 1.15), (-1, -0.5)] {
            assert!((a.scalar_coeff(k) - C64::new(v, 0.0)).norm() < 1e-15);
        }
        assert_eq!(a.tilde().tilde(), a);
    }

    #[test]
    fn winding_examples() {
        assert_eq!(FourierSymbol::monomial(1, 1).winding_number().unwrap(), 1);
        assert_eq!(FourierSymbol::scalar_real(&[(0, 2.0)]).winding_number().unwrap(), 0);
        assert_eq!(FourierSymbol::monomial(1, 2).winding_number().unwrap(), 2);
        assert_eq!(FourierSymbol::monomial(1, -3).winding_number().unwrap(), -3);
        assert_eq!(tridiagonal().winding_number().unwrap(), 0);
        let zero_on_circle = FourierSymbol::scalar_real(&[(0, 1.0), (1, 1.0)]);
        assert!(zero_on_circle.winding_number().is_err());
    }

    #[test]
    fn krein_weight_examples() {
        let a = FourierSymbol::scalar_real(&[(1, 1.0), (-1, 1.0)]);
        assert_eq!(a.krein_weight(), 2.0);
        assert_eq!(FourierSymbol::scalar_real(&[(0, 5.0)]).krein_weight(), 0.0);
        let entries: Vec<(i64, f64)> = (1..=100).map(|k| (k, 1.0 / (k * k) as f64)).collect();
        let oracle: f64 = (1..=100).map(|k| (k as f64).powi(-3)).sum();
        let w = FourierSymbol::scalar_real(&entries).krein_weight();
        assert!((w - oracle).abs() < 1e-12);
        assert!((w - 1.20205).abs() < 1e-4);
    }

    #[test]
    fn block_norm_convention() {
        assert_eq!(block_norm(&CMat::identity(3, 3)), 3.0);
    }

    #[test]
    fn lacunary_series_is_mean_zero_and_real() {
        let w = FourierSymbol::lacunary_series(1.0, 0.4, 6);
        assert_eq!(w.band(), 64);
        assert_eq!(w.scalar_coeff(0), ZERO);
        assert!((w.scalar_coeff(4).re - 0.5 * 2f64.powf(-0.8)).abs() < 1e-15);
        assert_eq!(w.scalar_coeff(3), ZERO);
    }
}
