//! Traces of analytic functions of finite sections and the constants `G_f`, `E_f`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::determinants::{log_e1_truncated, strong_szego_log};
use crate::error::{LabError, Result};
use crate::factorization::{invertibility_probe, scalar_log_coefficients};
use crate::linalg::{eigenvalues, expm, matmul, nearest_branch, trace, CMat, C64, ONE, ZERO};
use crate::operators::toeplitz_matrix;
use crate::symbols::FourierSymbol;

pub const MAX_POLY_DEGREE: usize = 32;

fn default_cut() -> f64 {
    PI
}

/// The function `f` in `tr f(T_n(a))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticFunctionSpec {
    /// `Σ_k coeffs[k] λ^k`.
    Polynomial { coeffs: Vec<C64> },
    Exp,
    /// Logarithm cut along the ray `{s e^{iφ} : s >= 0}`.
    Log {
        #[serde(default = "default_cut")]
        cut_angle: f64,
    },
}

impl AnalyticFunctionSpec {
    pub fn polynomial(coeffs: &[f64]) -> Self {
        Self::Polynomial { coeffs: coeffs.iter().map(|&x| C64::new(x, 0.0)).collect() }
    }

    pub fn log() -> Self {
        Self::Log { cut_angle: PI }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Polynomial { coeffs } if coeffs.len() > MAX_POLY_DEGREE + 1 => Err(LabError::Config(format!(
                "polynomial degree {} exceeds {MAX_POLY_DEGREE}",
                coeffs.len() - 1
            ))),
            Self::Log { cut_angle } if !cut_angle.is_finite() => Err(LabError::Config("cut angle must be finite".into())),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, z: C64) -> C64 {
        match self {
            Self::Polynomial { coeffs } => coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c),
            Self::Exp => z.exp(),
            Self::Log { cut_angle } => {
                // Argument in (φ − 2π, φ].
                let turns = ((z.arg() - cut_angle) / (2.0 * PI)).ceil();
                C64::new(z.norm().ln(), z.arg() - 2.0 * PI * turns)
            }
        }
    }

    pub fn derivative(&self, z: C64) -> C64 {
        match self {
            Self::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(ZERO, |acc, (k, &c)| acc * z + c * k as f64),
            Self::Exp => z.exp(),
            Self::Log { .. } => ONE / z,
        }
    }

    /// Distance from `z` to the set where `f` fails to be analytic.
    fn singular_distance(&self, z: C64) -> f64 {
        match self {
            Self::Log { cut_angle } => {
                let r = z * C64::from_polar(1.0, -cut_angle);
                if r.re <= 0.0 {
                    z.norm()
                } else {
                    r.im.abs()
                }
            }
            _ => f64::INFINITY,
        }
    }

    /// `tr f(A)` for a small square matrix.
    pub fn trace_of(&self, m: &CMat) -> Result<C64> {
        let n = m.nrows();
        if n == 1 {
            return Ok(self.eval(m[(0, 0)]));
        }
        match self {
            Self::Polynomial { coeffs } => Ok(polynomial_trace(m, coeffs)),
            Self::Exp if clustered(&eigenvalues(m)?) => Ok(trace(&expm(m))),
            _ => Ok(eigenvalues(m)?.into_iter().map(|l| self.eval(l)).sum()),
        }
    }
}

/// True when two eigenvalues nearly coincide, so eigenvector-based evaluation is unreliable.
fn clustered(eig: &[C64]) -> bool {
    let scale = eig.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    for i in 0..eig.len() {
        for j in i + 1..eig.len() {
            if (eig[i] - eig[j]).norm() < 1e-6 * scale {
                return true;
            }
        }
    }
    false
}

/// `Σ_k c_k tr(A^k)` by repeated products.
pub fn polynomial_trace(m: &CMat, coeffs: &[C64]) -> C64 {
    let n = m.nrows();
    let mut acc = coeffs.first().copied().unwrap_or(ZERO) * n as f64;
    let mut p = CMat::identity(n, n);
    for &c in coeffs.iter().skip(1) {
        p = matmul(&p, m);
        acc += c * trace(&p);
    }
    acc
}

/// Points of a convex hull; segments and single points are kept as such.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumHull {
    pub vertices: Vec<C64>,
    /// Center of the bounding box.
    pub centroid: C64,
    /// Largest distance from the centroid to a vertex.
    pub radius: f64,
}

fn cross(o: C64, a: C64, b: C64) -> f64 {
    (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
}

/// Monotone-chain hull; collinear points are dropped.
fn convex_hull(points: &[C64], tol: f64) -> Vec<C64> {
    let mut p: Vec<C64> = points.to_vec();
    p.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    p.dedup_by(|a, b| (*a - *b).norm() <= tol);
    if p.len() <= 2 {
        return p;
    }
    let mut lower: Vec<C64> = Vec::new();
    for &x in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], x) <= tol * tol {
            lower.pop();
        }
        lower.push(x);
    }
    let mut upper: Vec<C64> = Vec::new();
    for &x in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], x) <= tol * tol {
            upper.pop();
        }
        upper.push(x);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

impl SpectrumHull {
    pub fn from_points(points: &[C64]) -> Self {
        let scale = points.iter().fold(1.0f64, |m, z| m.max(z.norm()));
        let vertices = convex_hull(points, 1e-10 * scale);
        let centroid = if vertices.is_empty() {
            ZERO
        } else {
            let (mut lo, mut hi) = (vertices[0], vertices[0]);
            for v in &vertices {
                lo = C64::new(lo.re.min(v.re), lo.im.min(v.im));
                hi = C64::new(hi.re.max(v.re), hi.im.max(v.im));
            }
            (lo + hi) * 0.5
        };
        let radius = vertices.iter().map(|v| (v - centroid).norm()).fold(0.0, f64::max);
        Self { vertices, centroid, radius }
    }

    /// Scales the hull about the center of its bounding box by `1 + fraction`.
    pub fn inflated(&self, fraction: f64) -> Self {
        let vertices: Vec<C64> = self.vertices.iter().map(|v| self.centroid + (v - self.centroid) * (1.0 + fraction)).collect();
        Self { vertices, centroid: self.centroid, radius: self.radius * (1.0 + fraction) }
    }

    /// Largest `|v − z|` over the vertices.
    pub fn farthest_from(&self, z: C64) -> f64 {
        self.vertices.iter().map(|v| (v - z).norm()).fold(0.0, f64::max)
    }

    /// Width along the real and imaginary axes.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        let f = |g: fn(&C64) -> f64, max: bool| {
            self.vertices.iter().map(g).fold(if max { f64::NEG_INFINITY } else { f64::INFINITY }, |a, b| {
                if max {
                    a.max(b)
                } else {
                    a.min(b)
                }
            })
        };
        (f(|z| z.re, false), f(|z| z.re, true), f(|z| z.im, false), f(|z| z.im, true))
    }

    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }
}

/// Symbol samples used for the pointwise eigenvalue range.
pub const HULL_GRID: usize = 1024;

/// Eigenvalues of the `M`-sections of `T(a)`, `T(ã)` and of `a(e^{iθ})`, wrapped in a hull inflated by 10%.
pub fn spectrum_hull(a: &FourierSymbol, modes: usize) -> Result<SpectrumHull> {
    let mut pts = eigenvalues(&toeplitz_matrix(a, modes.saturating_sub(1)))?;
    pts.extend(eigenvalues(&toeplitz_matrix(&a.tilde(), modes.saturating_sub(1)))?);
    for s in a.samples(HULL_GRID.max((2 * a.band() + 2).next_power_of_two())) {
        pts.extend(eigenvalues(&s)?);
    }
    Ok(SpectrumHull::from_points(&pts).inflated(0.1))
}

/// Circular contour `|λ − center| = radius` sampled at `nodes` points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub center: C64,
    pub radius: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    /// Required clearance from the spectral hull; defaults to 20% of the hull diameter.
    #[serde(default)]
    pub margin: Option<f64>,
}

fn default_nodes() -> usize {
    64
}

impl ContourSpec {
    pub fn node(&self, j: usize, count: usize) -> (C64, C64) {
        let e = C64::from_polar(1.0, 2.0 * PI * j as f64 / count as f64);
        (self.center + e * self.radius, e)
    }

    /// Checks node count, clearance from `hull` and analyticity of `f` on the closed disk.
    pub fn validate(&self, hull: &SpectrumHull, f: &AnalyticFunctionSpec) -> Result<()> {
        if self.nodes < 64 || !self.nodes.is_power_of_two() {
            return Err(LabError::ContourInvalid(format!("{} nodes; need a power of two >= 64", self.nodes)));
        }
        if !(self.radius > 0.0) {
            return Err(LabError::ContourInvalid("radius must be positive".into()));
        }
        let margin = self.margin.unwrap_or(0.2 * hull.diameter());
        let clearance = self.radius - hull.farthest_from(self.center);
        if clearance < margin {
            return Err(LabError::ContourInvalid(format!(
                "clearance {clearance:.4} from the spectral hull is below the margin {margin:.4}"
            )));
        }
        let sing = f.singular_distance(self.center);
        if sing <= self.radius {
            return Err(LabError::ContourInvalid(format!(
                "the disk of radius {} meets the branch cut (distance {sing:.4})",
                self.radius
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceValue {
    pub n: usize,
    /// `Σ f(λ_i)` over the eigenvalues of `T_n(a)`.
    pub value: C64,
    /// `Σ_k c_k tr(T_n(a)^k)` for polynomial `f`.
    pub exact: Option<C64>,
    pub difference: Option<f64>,
}

/// `tr f(T_n(a))`.
pub fn trace_f(a: &FourierSymbol, f: &AnalyticFunctionSpec, n: usize) -> Result<TraceValue> {
    f.validate()?;
    let t = toeplitz_matrix(a, n);
    let value: C64 = eigenvalues(&t)?.into_iter().map(|l| f.eval(l)).sum();
    let exact = match f {
        AnalyticFunctionSpec::Polynomial { coeffs } => Some(polynomial_trace(&t, coeffs)),
        _ => None,
    };
    Ok(TraceValue { n, value, exact, difference: exact.map(|e| (e - value).norm()) })
}

/// `tr T_n(a)^2 = Σ_d (n+1−|d|) tr(a_d a_{−d})` from the coefficients alone.
pub fn trace_square(a: &FourierSymbol, n: usize) -> C64 {
    let b = a.band().min(n) as i64;
    (-b..=b)
        .filter_map(|d| {
            let p = a.coeff_ref(d)?;
            let q = a.coeff_ref(-d)?;
            Some(trace(&(p * q)) * (n as f64 + 1.0 - d.abs() as f64))
        })
        .sum()
}

pub const GF_MIN_NODES: usize = 1024;
const GF_MAX_NODES: usize = 1 << 16;

/// `(1/2π)∫ tr f(a(e^{iθ})) dθ` by the trapezoid rule with node doubling.
pub fn gf_constant(a: &FourierSymbol, f: &AnalyticFunctionSpec) -> Result<C64> {
    f.validate()?;
    let mut nodes = GF_MIN_NODES.max((4 * a.band() + 4).next_power_of_two());
    let mean = |k: usize| -> Result<C64> {
        let vals = a.samples(k).par_iter().map(|s| f.trace_of(s)).collect::<Result<Vec<_>>>()?;
        Ok(vals.iter().sum::<C64>() / k as f64)
    };
    let mut prev = mean(nodes)?;
    loop {
        nodes *= 2;
        let next = mean(nodes)?;
        let delta = (next - prev).norm();
        if delta <= 1e-13 * next.norm().max(1.0) {
            return Ok(next);
        }
        if nodes >= GF_MAX_NODES {
            return Err(LabError::QuadratureNonConvergence { delta, nodes });
        }
        prev = next;
    }
}

/// Largest band tried for the log coefficients of `a − λ`.
pub const NODE_LOG_BAND: usize = 1 << 14;
pub const EF_MAX_NODES: usize = 8192;
pub const EF_TOL: f64 = 1e-6;

fn node_log_e(a: &FourierSymbol, lambda: C64, modes: usize) -> Result<C64> {
    let shifted = a.shift_by(lambda);
    if a.is_scalar() {
        // Double the band until the outer quarter of the log coefficients is negligible.
        let mut band = 500usize.max(4 * a.band());
        loop {
            let logs = scalar_log_coefficients(&shifted, band)?;
            let k = band as i64;
            let outer = logs.max_coeff_in(-k..=-(3 * k / 4)).max(logs.max_coeff_in(3 * k / 4..=k));
            if outer <= 1e-16 * logs.max_coeff_in(-k..=k).max(1.0) || band >= NODE_LOG_BAND {
                return Ok(strong_szego_log(&logs));
            }
            band *= 2;
        }
    } else {
        let w = shifted.winding_number()?;
        if w != 0 {
            return Err(LabError::NonzeroWinding(w));
        }
        log_e1_truncated(&shifted, modes)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EfConstant {
    pub value: C64,
    pub nodes: usize,
    /// Change under the last node doubling.
    pub delta: f64,
}

/// `E_f = −(1/2πi)∮ f′(λ) log E(a−λ) dλ` on a circle, doubling the nodes until stable.
///
/// Scalar nodes use the closed-form `log E`; block nodes use an `M`-mode truncation.
pub fn ef_constant(a: &FourierSymbol, f: &AnalyticFunctionSpec, contour: &ContourSpec, modes: usize) -> Result<EfConstant> {
    f.validate()?;
    let hull = spectrum_hull(a, modes.min(128))?;
    contour.validate(&hull, f)?;
    if !a.is_scalar() {
        for j in 0..4 {
            let (lambda, _) = contour.node(j, 4);
            let probe = invertibility_probe(&a.shift_by(lambda), 64)?;
            if !(probe.toeplitz_invertible && probe.tilde_invertible) {
                return Err(LabError::ContourInvalid(format!("T(a − λ) not invertible at λ = {lambda}")));
            }
        }
    }
    let eval = |idx: &[usize], count: usize| -> Result<Vec<C64>> {
        idx.par_iter()
            .map(|&j| {
                let (lambda, _) = contour.node(j, count);
                node_log_e(a, lambda, modes)
            })
            .collect()
    };
    let mut count = contour.nodes;
    let all: Vec<usize> = (0..count).collect();
    let mut logs = eval(&all, count)?;
    unwrap_cyclic(&mut logs);
    let quad = |logs: &[C64]| -> C64 {
        let k = logs.len();
        let s: C64 = logs
            .iter()
            .enumerate()
            .map(|(j, l)| {
                let (lambda, e) = contour.node(j, k);
                f.derivative(lambda) * l * e
            })
            .sum();
        -s * contour.radius / k as f64
    };
    let mut value = quad(&logs);
    loop {
        let odd: Vec<usize> = (0..count).map(|j| 2 * j + 1).collect();
        let fresh = eval(&odd, 2 * count)?;
        let mut merged = Vec::with_capacity(2 * count);
        for (x, y) in logs.iter().zip(&fresh) {
            merged.push(*x);
            merged.push(*y);
        }
        count *= 2;
        unwrap_cyclic(&mut merged);
        let next = quad(&merged);
        let delta = (next - value).norm();
        logs = merged;
        value = next;
        if delta <= 1e-12 * value.norm().max(1.0) || (count >= EF_MAX_NODES && delta < EF_TOL) {
            return Ok(EfConstant { value, nodes: count, delta });
        }
        if count >= EF_MAX_NODES {
            return Err(LabError::QuadratureNonConvergence { delta, nodes: count });
        }
    }
}

/// Continuous branch along the closed contour starting from node 0.
fn unwrap_cyclic(v: &mut [C64]) {
    for i in 1..v.len() {
        let r = v[i - 1].im;
        v[i] = nearest_branch(v[i], r);
    }
}

/// `tr f(T_n(a)) − (n+1)G_f − E_f`.
pub fn trace_remainder(t: &TraceValue, g_f: C64, e_f: C64) -> C64 {
    t.exact.unwrap_or(t.value) - g_f * (t.n as f64 + 1.0) - e_f
}
