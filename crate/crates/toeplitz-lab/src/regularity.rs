//! Characteristic functions, moduli of continuity and tail sums.
//!
//! A [`CharFunction`] is `ω(x) = x^γ Π_k ℓ_k(b_k/x)^{β_k}` on `(0, π]`, with
//! `ℓ_1 = log` and `ℓ_k = log ∘ ℓ_{k-1}`.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::C64;
use crate::symbols::FourierSymbol;

/// Summation cutoff for tails; beyond it an integral estimate takes over.
pub const TAIL_CUTOFF: usize = 1_000_000;

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Gauss–Legendre rule on `[a, b]`.
fn gauss(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    GL_NODES.iter().zip(GL_WEIGHTS).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogFactor {
    pub beta: f64,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharFunction {
    gamma: f64,
    logs: Vec<LogFactor>,
}

/// Default `b_k`: the smallest constant with `ℓ_k(b_k/π) = 1`.
pub fn auto_log_constant(k: usize) -> Result<f64> {
    let mut y = 1.0f64;
    for _ in 0..k {
        y = y.exp();
    }
    if k == 0 || !(PI * y).is_finite() {
        return Err(LabError::InvalidArgument(format!(
            "automatic log constant unavailable at depth {k}"
        )));
    }
    Ok(PI * y)
}

/// `ℓ_k(y)`; `None` when an intermediate logarithm is not positive.
pub fn iterated_log(k: usize, y: f64) -> Option<f64> {
    let mut v = y;
    for _ in 0..k {
        if !(v > 0.0) {
            return None;
        }
        v = v.ln();
    }
    Some(v)
}

impl CharFunction {
    pub fn power(gamma: f64) -> Result<Self> {
        Self::new(gamma, Vec::new())
    }

    /// `logs[k-1] = (β_k, b_k)`; `b_k = None` picks [`auto_log_constant`].
    pub fn new(gamma: f64, logs: Vec<(f64, Option<f64>)>) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(LabError::InvalidArgument(format!("gamma must lie in (0,1), got {gamma}")));
        }
        let mut factors = Vec::with_capacity(logs.len());
        for (i, (beta, b)) in logs.into_iter().enumerate() {
            let b = match b {
                Some(b) => b,
                None => auto_log_constant(i + 1)?,
            };
            if !(b > 0.0) || !beta.is_finite() {
                return Err(LabError::InvalidArgument(format!("bad log factor ({beta}, {b})")));
            }
            match iterated_log(i + 1, b / PI) {
                Some(v) if v > 0.0 => {}
                _ => {
                    return Err(LabError::InvalidArgument(format!(
                        "iterated log of depth {} not positive on (0, pi] for b = {b}",
                        i + 1
                    )))
                }
            }
            factors.push(LogFactor { beta, b });
        }
        let w = Self { gamma, logs: factors };
        let far = w.eval(PI * 2f64.powi(-40))?;
        if !(far < w.eval(PI)? && far < w.eval(PI * 2f64.powi(-20))?) {
            return Err(LabError::InvalidArgument("characteristic function does not decay at 0".into()));
        }
        Ok(w)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn logs(&self) -> &[LogFactor] {
        &self.logs
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x <= PI * (1.0 + 1e-12)) {
            return Err(LabError::InvalidArgument(format!("x = {x} outside (0, pi]")));
        }
        Ok(self.eval_unchecked(x))
    }

    /// `ω(x)` without the domain check; also used beyond π by integral brackets.
    pub fn eval_unchecked(&self, x: f64) -> f64 {
        let mut v = x.powf(self.gamma);
        for (i, f) in self.logs.iter().enumerate() {
            let l = iterated_log(i + 1, f.b / x).unwrap_or(f64::NAN);
            v *= l.powf(f.beta);
        }
        v
    }

    /// `max ω(x)/ω(y)` over `x <= y` on a log grid; finite for almost-increasing ω.
    pub fn almost_increasing_constant(&self) -> f64 {
        let mut best: f64 = 1.0;
        let mut running: f64 = 0.0;
        for i in (0..=400).rev() {
            let x = PI * 2f64.powf(-(i as f64) * 0.5);
            let v = self.eval_unchecked(x);
            running = running.max(v);
            best = best.max(running / v);
        }
        best
    }
}

/// `ω(x) = x^γ Π ℓ_k^{β_k}(b_k/x)`.
pub fn char_eval(w: &CharFunction, x: f64) -> Result<f64> {
    w.eval(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BariStechkinMargins {
    pub sup1: f64,
    pub sup2: f64,
    pub sup1_divergent: bool,
    pub sup2_divergent: bool,
}

/// Integral of `f` over `[0, ∞)` on unit panels until the panels become negligible.
fn panel_integral(max_panels: usize, f: impl Fn(f64) -> f64) -> (f64, bool) {
    let mut total = 0.0;
    for j in 0..max_panels {
        let p = gauss(j as f64, j as f64 + 1.0, &f);
        total += p;
        if j >= 4 && p.abs() <= 1e-15 * total.abs() {
            return (total, true);
        }
    }
    (total, false)
}

/// The two suprema defining the Bari–Stechkin class, over 401 scales in `[π 2^{-200}, π]`.
pub fn bari_stechkin_margins(w: &CharFunction) -> BariStechkinMargins {
    let mut out = BariStechkinMargins { sup1: 0.0, sup2: 0.0, sup1_divergent: false, sup2_divergent: false };
    for i in 0..=400 {
        let s0 = i as f64 * 0.5;
        let x = PI * 2f64.powf(-s0);
        let wx = w.eval_unchecked(x);
        // ∫_0^x ω(y)/y dy with y = x 2^{-s}.
        let max_panels = (1000.0 - s0) as usize;
        let (i1, ok1) = panel_integral(max_panels, |s| w.eval_unchecked(x * 2f64.powf(-s)) * LN_2);
        if !ok1 {
            out.sup1_divergent = true;
        }
        out.sup1 = out.sup1.max(i1 / wx);
        // ∫_x^π ω(y)/y² dy with y = x 2^{s}, s ∈ [0, s0].
        let mut i2 = 0.0;
        let mut a = 0.0;
        while a < s0 {
            let b = (a + 1.0).min(s0);
            i2 += gauss(a, b, |s| w.eval_unchecked(x * 2f64.powf(s)) * 2f64.powf(-s) * LN_2);
            a = b;
        }
        out.sup2 = out.sup2.max(i2 / wx);
        if !i2.is_finite() {
            out.sup2_divergent = true;
        }
    }
    out
}

/// Grid-shift moduli `D[s] = max_j |f_{j+s} − f_j|` for `s <= s_max`, made nondecreasing.
/// Every shift up to this is scanned; beyond it, each octave is scanned at this many shifts.
const DENSE_SHIFTS: usize = 512;

/// Running max of grid differences; large shifts are sampled per octave, so entries stay lower bounds.
fn shift_moduli(vals: &[C64], s_max: usize) -> Vec<f64> {
    let m = vals.len();
    let s_max = s_max.min(m / 2);
    let mut d = vec![0.0f64; s_max + 1];
    for s in 1..=s_max {
        let step = (s / DENSE_SHIFTS).next_power_of_two().max(1);
        if s > DENSE_SHIFTS && s % step != 0 && s != s_max {
            d[s] = d[s - 1];
            continue;
        }
        let mut best = 0.0f64;
        for j in 0..m {
            let k = if j + s < m { j + s } else { j + s - m };
            best = best.max((vals[k] - vals[j]).norm());
        }
        d[s] = best.max(d[s - 1]);
    }
    d
}

fn shifts_for(x: f64, grid: usize) -> usize {
    ((x * grid as f64 / (2.0 * PI)) * (1.0 + 1e-12)).floor() as usize
}

/// Lower bound for `ω(f, x)` from grid shifts on `grid` points.
pub fn modulus_estimate(f: &FourierSymbol, x: f64, grid: usize) -> Result<f64> {
    f.require_scalar()?;
    if grid < 4096 || !grid.is_power_of_two() {
        return Err(LabError::InvalidArgument(format!("modulus grid {grid} must be a power of two >= 4096")));
    }
    let vals = f.scalar_samples(grid);
    let s = shifts_for(x, grid);
    Ok(*shift_moduli(&vals, s).last().unwrap_or(&0.0))
}

/// Moduli at a batch of scales sharing one set of samples.
#[derive(Clone, Debug)]
pub struct ModulusTable {
    grid: usize,
    d: Vec<f64>,
    sup: f64,
}

impl ModulusTable {
    /// Covers every scale up to `x_max`.
    pub fn new(f: &FourierSymbol, x_max: f64, grid: usize) -> Result<Self> {
        f.require_scalar()?;
        let vals = f.scalar_samples(grid);
        let sup = vals.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        Ok(Self { grid, d: shift_moduli(&vals, shifts_for(x_max, grid)), sup })
    }

    pub fn at(&self, x: f64) -> f64 {
        let s = shifts_for(x, self.grid).min(self.d.len() - 1);
        self.d[s]
    }

    /// Grid sup norm of the sampled function.
    pub fn sup_norm(&self) -> f64 {
        self.sup
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModulusProfile {
    pub scales: Vec<f64>,
    pub values: Vec<f64>,
    pub ratios: Vec<f64>,
    pub seminorm: f64,
    /// The three finest ratios decrease and end below half the seminorm.
    pub vanishing: bool,
}

/// Base grid for a profile: resolves the band with room to spare.
pub fn profile_grid(f: &FourierSymbol) -> usize {
    (8 * f.band() + 2).next_power_of_two().max(4096)
}

/// Largest grid difference over shifts in `(s_lo, s_hi]`, sampled at most `DENSE_SHIFTS` times.
fn shift_band_max(vals: &[C64], s_lo: usize, s_hi: usize) -> f64 {
    let m = vals.len();
    let s_hi = s_hi.min(m / 2);
    if s_hi <= s_lo {
        return 0.0;
    }
    let step = (s_hi - s_lo).div_ceil(DENSE_SHIFTS);
    let mut best = 0.0f64;
    let mut s = s_hi;
    while s > s_lo {
        for j in 0..m {
            let k = if j + s < m { j + s } else { j + s - m };
            best = best.max((vals[k] - vals[j]).norm_sqr());
        }
        s = s.saturating_sub(step);
    }
    best.sqrt()
}

/// `|f|_ω` on the scales `π 2^{-i}`, `i <= levels`, plus the vanishing-ratio proxy.
///
/// Each scale band `(x_{i+1}, x_i]` is scanned on a grid fine enough to hold a few dozen shifts.
pub fn holder_seminorm(f: &FourierSymbol, w: &CharFunction, levels: usize) -> Result<ModulusProfile> {
    f.require_scalar()?;
    let base = profile_grid(f);
    let scales: Vec<f64> = (0..=levels).map(|i| PI * 2f64.powi(-(i as i32))).collect();
    let mut values = vec![0.0f64; levels + 1];
    let mut cache: Vec<(usize, Vec<C64>)> = Vec::new();
    let mut running = 0.0f64;
    for i in (0..=levels).rev() {
        let grid = base.max(1usize << (i + 7).min(22));
        if !cache.iter().any(|(g, _)| *g == grid) {
            cache.push((grid, f.scalar_samples(grid)));
        }
        let vals = &cache.iter().find(|(g, _)| *g == grid).unwrap().1;
        let hi = shifts_for(scales[i], grid);
        let lo = if i == levels { 0 } else { shifts_for(scales[i + 1], grid) };
        running = running.max(shift_band_max(vals, lo, hi));
        values[i] = running;
    }
    let ratios: Vec<f64> = scales
        .iter()
        .zip(&values)
        .map(|(&x, &v)| v / w.eval_unchecked(x))
        .collect();
    let seminorm = ratios.iter().copied().fold(0.0, f64::max);
    let vanishing = if ratios.len() >= 3 {
        let t = &ratios[ratios.len() - 3..];
        t[2] < 0.5 * seminorm && t[0] > t[1] && t[1] > t[2]
    } else {
        false
    };
    Ok(ModulusProfile { scales, values, ratios, seminorm, vanishing })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailSum {
    /// `+∞` when the series diverges.
    pub value: f64,
    pub convergent: bool,
    /// Integral comparison `(∫_{n+1}^∞, ∫_n^∞)`.
    pub bracket: (f64, f64),
}

/// `[ω(1/k)ψ(1/k)]^m`.
pub fn tail_term(w: &CharFunction, p: &CharFunction, m: u32, k: f64) -> f64 {
    let x = 1.0 / k;
    (w.eval_unchecked(x) * p.eval_unchecked(x)).powi(m as i32)
}

/// Exponent test for `Σ [ω(1/k)ψ(1/k)]^m`: compares power, then each log level.
pub fn tail_converges(w: &CharFunction, p: &CharFunction, m: u32) -> bool {
    let m = m as f64;
    let power = m * (w.gamma + p.gamma);
    if (power - 1.0).abs() > 1e-12 {
        return power > 1.0;
    }
    let depth = w.logs.len().max(p.logs.len());
    for i in 0..depth {
        let beta = m * (w.logs.get(i).map_or(0.0, |f| f.beta) + p.logs.get(i).map_or(0.0, |f| f.beta));
        if (beta + 1.0).abs() > 1e-12 {
            return beta < -1.0;
        }
    }
    false
}

/// `∫_a^∞ g(x) dx` with `x = a 2^s`; a geometric extrapolation closes the last panels.
fn tail_integral(a: f64, g: impl Fn(f64) -> f64) -> f64 {
    let mut total = 0.0;
    let mut prev = f64::NAN;
    for j in 0..1000 {
        let p = gauss(j as f64, j as f64 + 1.0, |s| {
            let x = a * 2f64.powf(s);
            g(x) * x * LN_2
        });
        total += p;
        if p <= 1e-16 * total {
            return total;
        }
        if j > 900 && prev.is_finite() && p < prev {
            let r = p / prev;
            return total + p * r / (1.0 - r);
        }
        prev = p;
    }
    total
}

/// Tail sums at several `n` in one downward pass.
pub fn tail_sums(w: &CharFunction, p: &CharFunction, m: u32, ns: &[usize]) -> Vec<TailSum> {
    if !tail_converges(w, p, m) {
        return ns
            .iter()
            .map(|_| TailSum { value: f64::INFINITY, convergent: false, bracket: (f64::INFINITY, f64::INFINITY) })
            .collect();
    }
    let g = |k: f64| tail_term(w, p, m, k);
    let top = ns.iter().copied().max().unwrap_or(0);
    let cutoff = if top < TAIL_CUTOFF { TAIL_CUTOFF } else { 2 * top };
    let mut order: Vec<usize> = (0..ns.len()).collect();
    order.sort_by(|&a, &b| ns[b].cmp(&ns[a]));
    let mut out = vec![TailSum { value: 0.0, convergent: true, bracket: (0.0, 0.0) }; ns.len()];
    // Midpoint rule for the part beyond the cutoff.
    let mut acc = tail_integral(cutoff as f64 + 0.5, g);
    let mut k = cutoff;
    for idx in order {
        let n = ns[idx];
        while k > n {
            acc += g(k as f64);
            k -= 1;
        }
        let lo = tail_integral(n as f64 + 1.0, g);
        let hi = if n == 0 { f64::INFINITY } else { tail_integral(n as f64, g) };
        out[idx] = TailSum { value: acc, convergent: true, bracket: (lo, hi) };
    }
    out
}

/// `Σ_{k>n} [ω(1/k)ψ(1/k)]^m`.
pub fn tail_sum(w: &CharFunction, p: &CharFunction, m: u32, n: usize) -> TailSum {
    tail_sums(w, p, m, &[n])[0]
}

/// `[ω(1/n)ψ(1/n)]^{m−1} Σ_{j<=n} ω(1/j)ψ(1/j)`.
pub fn removal_condition(w: &CharFunction, p: &CharFunction, m: u32, n: usize) -> Result<f64> {
    if m < 2 || n == 0 {
        return Err(LabError::InvalidArgument("removal condition needs m >= 2 and n >= 1".into()));
    }
    let partial: f64 = (1..=n).rev().map(|j| tail_term(w, p, 1, j as f64)).sum();
    Ok(tail_term(w, p, m - 1, n as f64) * partial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn char_eval_examples() {
        let w = CharFunction::power(0.5).unwrap();
        assert!((char_eval(&w, 0.25).unwrap() - 0.5).abs() < 1e-15);
        let w = CharFunction::new(0.5, vec![(1.0, Some(PI * E))]).unwrap();
        assert!((char_eval(&w, PI).unwrap() - PI.sqrt()).abs() < 1e-12);
        assert!((char_eval(&w, PI).unwrap() - 1.772454).abs() < 1e-6);
        let w = CharFunction::power(0.4).unwrap();
        assert!((char_eval(&w, PI).unwrap() - PI.powf(0.4)).abs() < 1e-15);
        assert!((char_eval(&w, PI).unwrap() - 1.580738).abs() < 1e-6);
    }

    #[test]
    fn char_eval_domain() {
        let w = CharFunction::power(0.4).unwrap();
        assert!(w.eval(0.0).is_err());
        assert!(w.eval(4.0).is_err());
    }

    #[test]
    fn construction_guards() {
        assert!(CharFunction::power(1.0).is_err());
        assert!(CharFunction::power(0.0).is_err());
        assert!(CharFunction::new(0.5, vec![(1.0, Some(1.0))]).is_err());
        assert!(CharFunction::new(0.5, vec![(1.0, None), (-1.0, None)]).is_ok());
        assert!(auto_log_constant(4).is_err());
    }

    #[test]
    fn auto_constants() {
        assert!((auto_log_constant(1).unwrap() - PI * E).abs() < 1e-12);
        assert!((auto_log_constant(2).unwrap() - PI * E.powf(E)).abs() < 1e-9);
        let w = CharFunction::new(0.3, vec![(0.5, None), (0.5, None), (0.5, None)]).unwrap();
        for l in w.logs().iter().enumerate() {
            assert!(iterated_log(l.0 + 1, l.1.b / PI).unwrap() >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn bari_stechkin_power_oracles() {
        let m = bari_stechkin_margins(&CharFunction::power(0.5).unwrap());
        assert!((m.sup1 - 2.0).abs() < 1e-9, "{m:?}");
        assert!((m.sup2 - 2.0).abs() < 1e-6, "{m:?}");
        let m = bari_stechkin_margins(&CharFunction::power(0.9).unwrap());
        assert!((m.sup1 - 1.0 / 0.9).abs() < 1e-9, "{m:?}");
        assert!((m.sup2 - 10.0).abs() < 1e-3, "{m:?}");
        assert!(!m.sup1_divergent && !m.sup2_divergent);
    }

    #[test]
    fn modulus_examples() {
        let t = FourierSymbol::monomial(1, 1);
        assert!((modulus_estimate(&t, PI, 4096).unwrap() - 2.0).abs() < 1e-12);
        // Grid shifts bound the value from below by at most one grid step.
        let v = modulus_estimate(&t, PI / 3.0, 4096).unwrap();
        assert!(v <= 1.0 && v > 1.0 - 2e-3, "{v}");
        let c = FourierSymbol::scalar_real(&[(0, 3.0)]);
        assert_eq!(modulus_estimate(&c, 1.0, 4096).unwrap(), 0.0);
        assert!(modulus_estimate(&t, 1.0, 1024).is_err());
    }

    #[test]
    fn seminorm_of_shift() {
        let t = FourierSymbol::monomial(1, 1);
        let p = holder_seminorm(&t, &CharFunction::power(0.5).unwrap(), 12).unwrap();
        let oracle = 2.0 * (PI / 2.0).sin() / PI.sqrt();
        assert!((p.seminorm - oracle).abs() < 1e-9);
        assert!((p.seminorm - 1.128).abs() < 1e-3);
        assert!(p.vanishing);
    }

    #[test]
    fn seminorm_of_lacunary_series() {
        let f = FourierSymbol::lacunary_series(2.0, 0.4, 10);
        let p = holder_seminorm(&f, &CharFunction::power(0.4).unwrap(), 8).unwrap();
        assert!(p.seminorm.is_finite() && p.seminorm > 0.5);
        assert!(!p.vanishing, "{:?}", p.ratios);
    }

    #[test]
    fn tail_examples() {
        let w = CharFunction::power(0.4).unwrap();
        let t = tail_sum(&w, &w, 2, 100);
        let lo = 101f64.powf(-0.6) / 0.6;
        let hi = 100f64.powf(-0.6) / 0.6;
        assert!(t.convergent && t.value > lo && t.value < hi, "{t:?}");
        assert!((t.value - 0.105).abs() < 1e-3);
        assert!((t.bracket.0 - lo).abs() < 1e-9 && (t.bracket.1 - hi).abs() < 1e-9);

        let d = tail_sum(&w, &w, 1, 100);
        assert!(!d.convergent && d.value.is_infinite());

        let vals = tail_sums(&w, &w, 2, &[10, 100, 1000, 10_000, 100_000, 1_000_000, 10_000_000]);
        for pair in vals.windows(2) {
            assert!(pair[1].value < pair[0].value && pair[1].value > 0.0);
        }
    }

    #[test]
    fn tail_additivity() {
        let w = CharFunction::new(0.35, vec![(0.5, None)]).unwrap();
        let p = CharFunction::power(0.4).unwrap();
        let v = tail_sums(&w, &p, 2, &[41, 40]);
        let g = tail_term(&w, &p, 2, 41.0);
        assert!((v[1].value - (v[0].value + g)).abs() <= 1e-15 * v[1].value);
    }

    #[test]
    fn tail_convergence_with_logs() {
        let w = CharFunction::new(0.5, vec![(-1.0, None)]).unwrap();
        let one = CharFunction::new(0.5, vec![(0.0, None)]).unwrap();
        // Σ k^{-1} log^{-2}: convergent; Σ k^{-1} log^{-1}: divergent.
        assert!(tail_converges(&w, &w, 1));
        assert!(!tail_converges(&w, &one, 1));
    }

    #[test]
    fn removal_examples() {
        let w = CharFunction::power(0.4).unwrap();
        let v = removal_condition(&w, &w, 2, 10_000).unwrap();
        let oracle: f64 = 1e-4f64.powf(0.8) * (1..=10_000).map(|j| (j as f64).powf(-0.8)).sum::<f64>();
        assert!((v - oracle).abs() < 1e-12);
        assert!((v - 0.0171).abs() < 2e-4, "{v}");

        let q = CharFunction::power(0.25).unwrap();
        let a = removal_condition(&q, &q, 2, 1_000).unwrap();
        let b = removal_condition(&q, &q, 2, 100_000).unwrap();
        assert!(b > 0.9 * a, "{a} {b}");
        assert!(removal_condition(&q, &q, 1, 10).is_err());
    }

    #[test]
    fn almost_increasing_for_powers_is_one() {
        assert_eq!(CharFunction::power(0.3).unwrap().almost_increasing_constant(), 1.0);
    }
}
