//! Canonical Wiener–Hopf factors `a = u₋u₊ = v₊v₋` and the auxiliary symbols
//! `b = v₋u₊⁻¹`, `c = u₋⁻¹v₊`.
//!
//! Scalar symbols are factored by splitting `log a`; block symbols are assembled from given factors.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::linalg::{singular_values, C64};
use crate::operators::toeplitz_matrix;
use crate::symbols::{default_grid, FourierSymbol};

/// Largest coefficient tolerated on the wrong side of a one-sided factor.
pub const SUPPORT_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct FactorPair {
    pub u_minus: FourierSymbol,
    pub u_plus: FourierSymbol,
    pub v_minus: FourierSymbol,
    pub v_plus: FourierSymbol,
    pub u_minus_inv: FourierSymbol,
    pub u_plus_inv: FourierSymbol,
    pub v_minus_inv: FourierSymbol,
    pub v_plus_inv: FourierSymbol,
    pub b: FourierSymbol,
    pub c: FourierSymbol,
    /// Fourier coefficients of `log a` (scalar factorizations only).
    pub log_coeffs: Option<FourierSymbol>,
    /// Largest per-coefficient error of `u₋u₊` against the symbol.
    pub reconstruction_error: f64,
}

impl FactorPair {
    pub fn dim(&self) -> usize {
        self.u_plus.dim()
    }

    /// Largest coefficient of `c·b − I`.
    pub fn product_defect(&self) -> Result<f64> {
        let cb = self.c.multiply(&self.b)?;
        Ok(cb.max_coeff_diff(&FourierSymbol::identity(self.dim())))
    }
}

fn wrong_side(s: &FourierSymbol, plus: bool) -> f64 {
    let k = s.band() as i64;
    if plus {
        s.max_coeff_in(-k..=-1)
    } else {
        s.max_coeff_in(1..=k)
    }
}

fn check_side(name: &str, s: &FourierSymbol, plus: bool) -> Result<()> {
    let v = wrong_side(s, plus);
    if v > SUPPORT_TOL {
        let side = if plus { "negative" } else { "positive" };
        return Err(LabError::FactorViolation(format!("{name} has {side}-index coefficient {v:.3e}")));
    }
    Ok(())
}

fn one_sided(s: &FourierSymbol, plus: bool) -> FourierSymbol {
    let k = s.band() as i64;
    if plus {
        s.restrict(0..=k)
    } else {
        s.restrict(-k..=0)
    }
}

/// Fourier coefficients of `log a` with a continuous branch; requires winding number zero.
pub fn scalar_log_coefficients(a: &FourierSymbol, band: usize) -> Result<FourierSymbol> {
    a.require_scalar()?;
    let grid = default_grid(a.band().max(band));
    let log = a.continuous_log_det(grid)?;
    if log.winding != 0 {
        return Err(LabError::NonzeroWinding(log.winding));
    }
    FourierSymbol::from_scalar_samples(&log.values, band)
}

/// Canonical factors of a scalar symbol by splitting `log a`; `c₀` goes to the plus factor.
pub fn scalar_canonical_factor(a: &FourierSymbol, band: usize) -> Result<FactorPair> {
    let logs = scalar_log_coefficients(a, band)?;
    let k = band as i64;
    let plus = logs.restrict(0..=k);
    let minus = logs.restrict(-k..=-1);
    let exp = |s: &FourierSymbol| s.exp_scalar(band);
    let u_plus = exp(&plus)?;
    let u_minus = exp(&minus)?;
    let u_plus_inv = exp(&plus.scale(C64::new(-1.0, 0.0)))?;
    let u_minus_inv = exp(&minus.scale(C64::new(-1.0, 0.0)))?;
    for (name, s, side) in [
        ("u+", &u_plus, true),
        ("u-", &u_minus, false),
        ("u+^-1", &u_plus_inv, true),
        ("u-^-1", &u_minus_inv, false),
    ] {
        check_side(name, s, side)?;
    }
    let (u_plus, u_minus) = (one_sided(&u_plus, true), one_sided(&u_minus, false));
    let (u_plus_inv, u_minus_inv) = (one_sided(&u_plus_inv, true), one_sided(&u_minus_inv, false));
    let diff = minus.add(&plus.scale(C64::new(-1.0, 0.0)))?;
    let b = exp(&diff)?;
    let c = exp(&diff.scale(C64::new(-1.0, 0.0)))?;
    let reconstruction_error = u_minus.multiply(&u_plus)?.truncate(band).max_coeff_diff(&a.truncate(band));
    let scale = (0..=a.band() as i64).map(|j| a.scalar_coeff(j).norm().max(a.scalar_coeff(-j).norm())).fold(1.0, f64::max);
    if reconstruction_error > SUPPORT_TOL * scale {
        return Err(LabError::FactorViolation(format!(
            "u- u+ misses the symbol by {reconstruction_error:.3e}; increase the band"
        )));
    }
    Ok(FactorPair {
        v_minus: u_minus.clone(),
        v_plus: u_plus.clone(),
        v_minus_inv: u_minus_inv.clone(),
        v_plus_inv: u_plus_inv.clone(),
        u_minus,
        u_plus,
        u_minus_inv,
        u_plus_inv,
        b,
        c,
        log_coeffs: Some(logs),
        reconstruction_error,
    })
}

/// `a = u₋u₊` with the pair assembled from given block factors.
pub fn fixture_block_symbol(
    u_minus: &FourierSymbol,
    u_plus: &FourierSymbol,
    v_plus: &FourierSymbol,
    v_minus: &FourierSymbol,
) -> Result<(FourierSymbol, FactorPair)> {
    let dim = u_plus.dim();
    for s in [u_minus, v_plus, v_minus] {
        if s.dim() != dim {
            return Err(LabError::BlockSizeMismatch(dim, s.dim()));
        }
    }
    check_side("u+", u_plus, true)?;
    check_side("v+", v_plus, true)?;
    check_side("u-", u_minus, false)?;
    check_side("v-", v_minus, false)?;
    for (name, s) in [("u-", u_minus), ("u+", u_plus), ("v+", v_plus), ("v-", v_minus)] {
        let d = s.coeff(0).determinant().norm();
        if !(d > 1e-12) {
            return Err(LabError::FactorViolation(format!("zeroth coefficient of {name} is singular")));
        }
    }
    let a = u_minus.multiply(u_plus)?;
    let left = v_plus.multiply(v_minus)?;
    let mismatch = a.max_coeff_diff(&left);
    if mismatch > SUPPORT_TOL {
        return Err(LabError::FactorViolation(format!(
            "right and left factorizations differ by {mismatch:.3e}"
        )));
    }
    let band = 4 * [u_minus, u_plus, v_plus, v_minus].iter().map(|s| s.band()).max().unwrap_or(0);
    let band = band.max(32);
    let inv = |name: &str, s: &FourierSymbol, plus: bool| -> Result<FourierSymbol> {
        let i = s.inverse(band)?;
        check_side(name, &i, plus)?;
        Ok(one_sided(&i, plus).trimmed(1e-15))
    };
    let u_plus_inv = inv("u+^-1", u_plus, true)?;
    let u_minus_inv = inv("u-^-1", u_minus, false)?;
    let v_plus_inv = inv("v+^-1", v_plus, true)?;
    let v_minus_inv = inv("v-^-1", v_minus, false)?;
    let b = v_minus.multiply(&u_plus_inv)?.trimmed(1e-15);
    let c = u_minus_inv.multiply(v_plus)?.trimmed(1e-15);
    let pair = FactorPair {
        u_minus: u_minus.clone(),
        u_plus: u_plus.clone(),
        v_minus: v_minus.clone(),
        v_plus: v_plus.clone(),
        u_minus_inv,
        u_plus_inv,
        v_minus_inv,
        v_plus_inv,
        b,
        c,
        log_coeffs: None,
        reconstruction_error: 0.0,
    };
    Ok((a, pair))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SectionConditioning {
    pub modes: usize,
    pub sigma_min: f64,
    pub condition: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvertibilityProbe {
    pub toeplitz_invertible: bool,
    pub tilde_invertible: bool,
    /// Sections of `T(a)` at `M` and `2M`.
    pub toeplitz: [SectionConditioning; 2],
    /// Sections of `T(ã)` at `M` and `2M`.
    pub tilde: [SectionConditioning; 2],
}

fn conditioning(a: &FourierSymbol, modes: usize) -> SectionConditioning {
    let s = singular_values(&toeplitz_matrix(a, modes - 1));
    let max = s.first().copied().unwrap_or(0.0);
    let min = s.last().copied().unwrap_or(0.0);
    SectionConditioning { modes, sigma_min: min, condition: if min > 0.0 { max / min } else { f64::INFINITY } }
}

fn stable(p: &[SectionConditioning; 2]) -> bool {
    p[0].sigma_min > 1e-6 && (p[0].sigma_min - p[1].sigma_min).abs() <= 0.1 * p[0].sigma_min
}

/// Smallest singular values of `T(a)` and `T(ã)` sections at `M` and `2M`.
pub fn invertibility_probe(a: &FourierSymbol, modes: usize) -> Result<InvertibilityProbe> {
    if modes < 64 {
        return Err(LabError::InvalidArgument(format!("probe needs M >= 64, got {modes}")));
    }
    let at = a.tilde();
    let toeplitz = [conditioning(a, modes), conditioning(a, 2 * modes)];
    let tilde = [conditioning(&at, modes), conditioning(&at, 2 * modes)];
    Ok(InvertibilityProbe {
        toeplitz_invertible: stable(&toeplitz),
        tilde_invertible: stable(&tilde),
        toeplitz,
        tilde,
    })
}
