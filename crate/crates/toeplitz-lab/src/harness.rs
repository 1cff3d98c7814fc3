//! Scenario configs, the experiment runner, rate fits and report emission.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::determinants::{ho_remainders, log_det_sequence, szego_constant, ConstantSource};
use crate::error::{LabError, Result};
use crate::factorization::{fixture_block_symbol, invertibility_probe, scalar_canonical_factor, FactorPair, InvertibilityProbe};
use crate::linalg::{CMat, C64};
use crate::operators::{singular_values, OpTruncation, TruncationNorms, TruncationProbe};
use crate::regularity::{holder_seminorm, removal_condition, CharFunction};
use crate::symbols::FourierSymbol;
use crate::traces::{ef_constant, gf_constant, spectrum_hull, trace_f, trace_remainder, AnalyticFunctionSpec, ContourSpec, TraceValue};

/// One Fourier coefficient: `k` and the real and imaginary parts as row-major matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffRecord {
    pub k: i64,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

fn matrix_from_rows(re: &[Vec<f64>], im: Option<&Vec<Vec<f64>>>) -> Result<CMat> {
    let n = re.len();
    if n == 0 || re.iter().any(|r| r.len() != n) {
        return Err(LabError::Config("coefficient matrices must be square and nonempty".into()));
    }
    if let Some(im) = im {
        if im.len() != n || im.iter().any(|r| r.len() != n) {
            return Err(LabError::Config("imaginary part has a different shape".into()));
        }
    }
    Ok(CMat::from_fn(n, n, |i, j| C64::new(re[i][j], im.map_or(0.0, |m| m[i][j]))))
}

/// Builds a symbol from coefficient records.
pub fn symbol_from_records(records: &[CoeffRecord]) -> Result<FourierSymbol> {
    let first = records.first().ok_or_else(|| LabError::Config("empty coefficient list".into()))?;
    let dim = first.re.len();
    let entries = records
        .iter()
        .map(|r| Ok((r.k, matrix_from_rows(&r.re, r.im.as_ref())?)))
        .collect::<Result<Vec<_>>>()?;
    FourierSymbol::new(dim, entries).map_err(|e| LabError::Config(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SymbolSpec {
    Laurent {
        coeffs: Vec<CoeffRecord>,
    },
    /// `exp(A Σ_{j<=L} 2^{−γj} cos 2^j θ)`.
    ExpLacunary {
        gamma: f64,
        levels: u32,
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        band: Option<usize>,
    },
    /// `a = u₋u₊` with a second factorization `a = v₊v₋`.
    Fixture {
        u_minus: Vec<CoeffRecord>,
        u_plus: Vec<CoeffRecord>,
        v_plus: Vec<CoeffRecord>,
        v_minus: Vec<CoeffRecord>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogConstant {
    Value(f64),
    Auto(String),
}

impl Default for LogConstant {
    fn default() -> Self {
        LogConstant::Auto("auto".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogSpec {
    pub beta: f64,
    #[serde(default)]
    pub b: LogConstant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharSpec {
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub logs: Vec<LogSpec>,
}

impl CharSpec {
    pub fn power(gamma: f64) -> Self {
        Self { gamma, logs: Vec::new() }
    }

    pub fn build(&self) -> Result<CharFunction> {
        let logs = self
            .logs
            .iter()
            .map(|l| match &l.b {
                LogConstant::Value(b) => Ok((l.beta, Some(*b))),
                LogConstant::Auto(s) if s == "auto" => Ok((l.beta, None)),
                LogConstant::Auto(s) => Err(LabError::Config(format!("log constant must be a number or \"auto\", got {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        CharFunction::new(self.gamma, logs).map_err(|e| LabError::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSpec {
    List(Vec<usize>),
    Geometric { start: usize, stop: usize, factor: usize },
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec::Geometric { start: 8, stop: 512, factor: 2 }
    }
}

impl ScheduleSpec {
    pub fn values(&self) -> Result<Vec<usize>> {
        let v = match self {
            ScheduleSpec::List(v) => v.clone(),
            ScheduleSpec::Geometric { start, stop, factor } => {
                if *start == 0 || *factor < 2 {
                    return Err(LabError::Config("geometric schedule needs start >= 1 and factor >= 2".into()));
                }
                let mut v = Vec::new();
                let mut n = *start;
                while n <= *stop {
                    v.push(n);
                    n *= factor;
                }
                v
            }
        };
        if v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LabError::Config("schedule must be strictly increasing".into()));
        }
        Ok(v)
    }
}

fn default_trend() -> f64 {
    0.3
}

fn default_sv_window() -> (usize, usize) {
    (8, 128)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// o-case when last-window mean ratio < `trend` × first-window mean ratio.
    #[serde(default = "default_trend")]
    pub trend: f64,
    /// Index window for the singular-value slope of `H(a)`.
    #[serde(default = "default_sv_window")]
    pub sv_window: (usize, usize),
    /// Window in `n` for remainder and tail slopes; whole schedule when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<(usize, usize)>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { trend: default_trend(), sv_window: default_sv_window(), fit_window: None }
    }
}

fn yes() -> bool {
    true
}

/// Optional stages of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    #[serde(default = "yes")]
    pub hankel_sv: bool,
    #[serde(default = "yes")]
    pub truncation_bounds: bool,
    #[serde(default = "yes")]
    pub vanishing: bool,
}

impl Default for Checks {
    fn default() -> Self {
        Self { hankel_sv: true, truncation_bounds: true, vanishing: true }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
}

fn default_m() -> usize {
    1
}

fn default_truncation() -> usize {
    256
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub symbol: SymbolSpec,
    /// Band of the scalar log-split factors; defaults to `max(64, 4·band)`, or `band` above 1024.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor_band: Option<usize>,
    pub omega: CharSpec,
    /// Defaults to `omega`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<CharSpec>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    /// Truncation size `M` for constants and operator checks.
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour: Option<ContourSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<AnalyticFunctionSpec>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub outputs: OutputSpec,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(LabError::Config("m must be >= 1".into()));
        }
        if self.truncation < 128 {
            return Err(LabError::Config(format!("truncation M = {} is below 128", self.truncation)));
        }
        let sched = self.schedule.values()?;
        if let Some(&top) = sched.last() {
            if top > 4096 {
                return Err(LabError::Config(format!("schedule reaches n = {top}; the limit is 4096")));
            }
        }
        if !(self.thresholds.trend > 0.0 && self.thresholds.trend < 1.0) {
            return Err(LabError::Config("trend threshold must lie in (0, 1)".into()));
        }
        let (lo, hi) = self.thresholds.sv_window;
        if lo >= hi {
            return Err(LabError::Config("sv_window must be increasing".into()));
        }
        if let SymbolSpec::ExpLacunary { gamma, levels, .. } = &self.symbol {
            if !(*gamma > 0.0) || *levels > 20 {
                return Err(LabError::Config("lacunary symbol needs gamma > 0 and at most 20 levels".into()));
            }
        }
        if let Some(f) = &self.f {
            f.validate()?;
        }
        self.omega.build()?;
        self.psi_spec().build()?;
        Ok(())
    }

    pub fn schedule(&self) -> Vec<usize> {
        self.schedule.values().unwrap_or_default()
    }

    fn psi_spec(&self) -> &CharSpec {
        self.psi.as_ref().unwrap_or(&self.omega)
    }

    pub fn omega(&self) -> Result<CharFunction> {
        self.omega.build()
    }

    pub fn psi(&self) -> Result<CharFunction> {
        self.psi_spec().build()
    }

    pub fn build_symbol(&self) -> Result<FourierSymbol> {
        match &self.symbol {
            SymbolSpec::Laurent { coeffs } => symbol_from_records(coeffs),
            SymbolSpec::ExpLacunary { gamma, levels, amplitude, band } => {
                let band = band.unwrap_or(lacunary_band(*levels));
                FourierSymbol::exp_lacunary(*amplitude, *gamma, *levels, band)
            }
            SymbolSpec::Fixture { u_minus, u_plus, .. } => symbol_from_records(u_minus)?.multiply(&symbol_from_records(u_plus)?),
        }
    }

    /// The symbol and its factor pair.
    pub fn build_pair(&self) -> Result<(FourierSymbol, FactorPair)> {
        match &self.symbol {
            SymbolSpec::Fixture { u_minus, u_plus, v_plus, v_minus } => fixture_block_symbol(
                &symbol_from_records(u_minus)?,
                &symbol_from_records(u_plus)?,
                &symbol_from_records(v_plus)?,
                &symbol_from_records(v_minus)?,
            ),
            _ => {
                let a = self.build_symbol()?;
                if !a.is_scalar() {
                    return Err(LabError::Config("block symbols need a factor fixture".into()));
                }
                let band = self.factor_band.unwrap_or_else(|| default_factor_band(a.band()));
                let pair = scalar_canonical_factor(&a, band)?;
                Ok((a, pair))
            }
        }
    }

    /// The function whose modulus profile decides the vanishing flag.
    fn profile_symbol(&self, a: &FourierSymbol) -> Option<FourierSymbol> {
        match &self.symbol {
            SymbolSpec::ExpLacunary { gamma, levels, amplitude, .. } => {
                Some(FourierSymbol::lacunary_series(*amplitude, *gamma, *levels))
            }
            _ if a.is_scalar() => Some(a.clone()),
            _ => None,
        }
    }
}

pub fn default_factor_band(band: usize) -> usize {
    if band > 1024 {
        band
    } else {
        (4 * band).max(64)
    }
}

/// Default band for `exp` of a lacunary series with top frequency `2^L`.
pub fn lacunary_band(levels: u32) -> usize {
    (4usize << levels).max(64)
}

/// Least-squares slope of `log value` against `log n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    /// Residual standard error of the log–log fit.
    pub confidence: f64,
    pub points: usize,
}

/// Fits over the points with `window.0 <= n <= window.1`.
pub fn rate_fit(series: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = series.iter().copied().filter(|(n, _)| *n >= window.0 && *n <= window.1).collect();
    if pts.len() < 5 {
        return Err(LabError::InvalidArgument(format!("{} points in the window; need at least 5", pts.len())));
    }
    if let Some((n, v)) = pts.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
        return Err(LabError::InvalidArgument(format!("fit skipped: value {v} at n = {n} is not positive")));
    }
    let xs: Vec<f64> = pts.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, v)| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    Ok(RateFit { slope, confidence: (ssr / (k - 2.0)).sqrt(), points: pts.len() })
}

#[derive(Clone, Debug, Serialize)]
pub struct FitOutcome {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<RateFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

impl From<Result<RateFit>> for FitOutcome {
    fn from(r: Result<RateFit>) -> Self {
        match r {
            Ok(f) => FitOutcome { fit: Some(f), skipped: None },
            Err(e) => FitOutcome { fit: None, skipped: Some(e.to_string()) },
        }
    }
}

/// `mean(last window) / mean(first window)` with windows of `⌈len/4⌉` points.
pub fn ratio_trend(ratios: &[f64]) -> Option<f64> {
    if ratios.len() < 2 || ratios.iter().any(|r| !r.is_finite()) {
        return None;
    }
    let w = ratios.len().div_ceil(4);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let first = mean(&ratios[..w]);
    let last = mean(&ratios[ratios.len() - w..]);
    if first > 0.0 {
        Some(last / first)
    } else {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DeltaClass {
    /// Ratio trends to zero: little-o remainder.
    LittleO,
    /// Ratio stays bounded away from zero and infinity.
    BigO,
    Undetermined,
}

#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    pub trend: Option<f64>,
    pub threshold: f64,
    pub class: DeltaClass,
    /// Small-scale modulus ratios decreasing to zero.
    pub vanishing: Option<bool>,
}

pub fn classify(ratios: &[Option<f64>], threshold: f64, vanishing: Option<bool>) -> Classification {
    let vals: Option<Vec<f64>> = ratios.iter().copied().collect();
    let trend = vals.as_deref().and_then(ratio_trend);
    let class = match trend {
        Some(t) if t < threshold => DeltaClass::LittleO,
        Some(_) => DeltaClass::BigO,
        None => DeltaClass::Undetermined,
    };
    Classification { trend, threshold, class, vanishing }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportRow {
    pub n: usize,
    pub log_det: Option<C64>,
    pub widom_rem: Option<C64>,
    pub ho_c_rem: Option<C64>,
    pub ho_d_rem: Option<C64>,
    pub ho_e_int: Option<C64>,
    pub tail: f64,
    pub ratio: Option<f64>,
    pub trace_rem: Option<C64>,
    /// `tr F_{n,m−1}`.
    pub trace_f_last: Option<C64>,
    pub removal: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Constants {
    pub g: C64,
    pub log_g: C64,
    pub e1: C64,
    pub log_e1: C64,
    pub e1_source: ConstantSource,
    pub log_e_intercept: Option<C64>,
    pub intercept_spread: f64,
    pub log_det_m_dual: C64,
    pub duality_defect: f64,
    pub doubling_delta: f64,
    pub stable: bool,
    pub g_f: Option<C64>,
    pub e_f: Option<C64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorSummary {
    pub dim: usize,
    pub symbol_band: usize,
    pub b_band: usize,
    pub c_band: usize,
    pub reconstruction_error: f64,
    pub product_defect: f64,
    pub winding: i64,
    pub probe: InvertibilityProbe,
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncationCheck {
    pub samples: Vec<TruncationNorms>,
    /// Largest `norm/bound` per product over all samples.
    pub max_ratios: [f64; 4],
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticsReport {
    pub name: String,
    pub version: String,
    pub config: ScenarioConfig,
    pub factor: FactorSummary,
    pub constants: Constants,
    pub rows: Vec<ReportRow>,
    pub fits: BTreeMap<String, FitOutcome>,
    pub classification: Classification,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationCheck>,
    /// Stage failures that did not abort the run.
    pub errors: Vec<String>,
}

/// Probe sizes are capped to keep the SVDs small.
const PROBE_MODES: usize = 128;
const VANISHING_LEVELS: usize = 12;

pub fn factor_summary(a: &FourierSymbol, pair: &FactorPair) -> Result<FactorSummary> {
    Ok(FactorSummary {
        dim: a.dim(),
        symbol_band: a.band(),
        b_band: pair.b.band(),
        c_band: pair.c.band(),
        reconstruction_error: pair.reconstruction_error,
        product_defect: pair.product_defect()?,
        winding: a.winding_number()?,
        probe: invertibility_probe(a, PROBE_MODES)?,
    })
}

/// Symbol, pair and factor summary for the `factor` subcommand.
pub fn run_factor(config: &ScenarioConfig) -> Result<FactorSummary> {
    let (a, pair) = config.build_pair()?;
    factor_summary(&a, &pair)
}

/// `s_k(H(a))` on the `M`-mode truncation.
pub fn hankel_singular_values(a: &FourierSymbol, modes: usize) -> Vec<f64> {
    singular_values(&OpTruncation::hankel(a, modes))
}

#[derive(Clone, Debug, Serialize)]
pub struct HankelSv {
    pub modes: usize,
    pub values: Vec<f64>,
    pub fit: FitOutcome,
}

pub fn run_hankel_sv(config: &ScenarioConfig) -> Result<HankelSv> {
    let a = config.build_symbol()?;
    let values = hankel_singular_values(&a, config.truncation);
    let (lo, hi) = config.thresholds.sv_window;
    let pts: Vec<(f64, f64)> = values.iter().enumerate().map(|(i, &s)| (i as f64, s)).collect();
    let fit = rate_fit(&pts, (lo as f64, hi as f64)).into();
    Ok(HankelSv { modes: config.truncation, values, fit })
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceSeries {
    pub g_f: C64,
    pub e_f: Option<C64>,
    pub values: Vec<TraceValue>,
    pub remainders: Vec<Option<C64>>,
    pub errors: Vec<String>,
}

/// Contour used when the config gives none: a circle around the hull with room for the default margin.
pub fn auto_contour(a: &FourierSymbol, modes: usize) -> Result<ContourSpec> {
    let hull = spectrum_hull(a, modes.min(128))?;
    let reach = hull.farthest_from(hull.centroid);
    Ok(ContourSpec { center: hull.centroid, radius: 1.5 * reach + 0.1, nodes: 64, margin: None })
}

pub fn run_trace_series(config: &ScenarioConfig) -> Result<TraceSeries> {
    let f = config.f.as_ref().ok_or_else(|| LabError::Config("trace-series needs an `f` entry".into()))?;
    let a = config.build_symbol()?;
    trace_series(&a, f, config.contour.as_ref(), config.truncation, &config.schedule())
}

fn trace_series(
    a: &FourierSymbol,
    f: &AnalyticFunctionSpec,
    contour: Option<&ContourSpec>,
    modes: usize,
    schedule: &[usize],
) -> Result<TraceSeries> {
    let mut errors = Vec::new();
    let g_f = gf_constant(a, f)?;
    let contour = match contour {
        Some(c) => Some(c.clone()),
        None => match auto_contour(a, modes) {
            Ok(c) => Some(c),
            Err(e) => {
                errors.push(format!("contour: {e}"));
                None
            }
        },
    };
    let e_f = contour.and_then(|c| match ef_constant(a, f, &c, modes) {
        Ok(e) => Some(e.value),
        Err(e) => {
            errors.push(format!("E_f: {e}"));
            None
        }
    });
    let values = schedule.iter().map(|&n| trace_f(a, f, n)).collect::<Result<Vec<_>>>()?;
    let remainders = values.iter().map(|t| e_f.map(|e| trace_remainder(t, g_f, e))).collect();
    Ok(TraceSeries { g_f, e_f, values, remainders, errors })
}

/// Largest `n` used by the truncation-bound checks.
const TRUNCATION_CHECK_MAX_N: usize = 128;

fn truncation_check(pair: &FactorPair, schedule: &[usize], modes: usize) -> Result<TruncationCheck> {
    let probe = TruncationProbe::new(pair)?;
    let mut samples = Vec::new();
    for &n in schedule.iter().filter(|&&n| n <= TRUNCATION_CHECK_MAX_N && n + 1 < modes) {
        let mut js = vec![0, n / 2, n];
        js.dedup();
        for j in js {
            samples.push(probe.norms(n, j, modes)?);
        }
    }
    let mut max_ratios = [0.0f64; 4];
    for s in &samples {
        for (m, r) in max_ratios.iter_mut().zip(s.ratios()) {
            *m = m.max(r);
        }
    }
    Ok(TruncationCheck { samples, max_ratios })
}

/// Runs every stage of a scenario.
///
/// Failures of the optional stages (traces, singular values, truncation bounds, vanishing
/// profile) are recorded in `errors`; the core stages propagate their errors.
pub fn run_scenario(config: &ScenarioConfig) -> Result<AsymptoticsReport> {
    config.validate()?;
    let schedule = config.schedule();
    let (w, p) = (config.omega()?, config.psi()?);
    let (a, pair) = config.build_pair()?;
    let factor = factor_summary(&a, &pair)?;
    let mut errors = Vec::new();
    if !(factor.probe.toeplitz_invertible && factor.probe.tilde_invertible) {
        errors.push("invertibility probe: sections of T(a) or T(ã) look unstable".into());
    }
    let n_max = schedule.last().copied().unwrap_or(0);
    let mut series = log_det_sequence(&a, n_max);
    series.refine(&a, &schedule);
    if !series.gaps.is_empty() {
        errors.push(format!("singular sections at n = {:?}", series.gaps));
    }
    let consts = szego_constant(&a, &pair, config.truncation)?;
    if !consts.stable {
        errors.push(format!("truncated constants moved by {:.3e} under M doubling", consts.doubling_delta));
    }
    let ho = ho_remainders(&series, &consts, &pair, &w, &p, config.m, &schedule)?;

    let traces = config.f.as_ref().map(|f| trace_series(&a, f, config.contour.as_ref(), config.truncation, &schedule));
    let traces = match traces {
        Some(Ok(t)) => {
            errors.extend(t.errors.iter().cloned());
            Some(t)
        }
        Some(Err(e)) => {
            errors.push(format!("traces: {e}"));
            None
        }
        None => None,
    };

    let rows: Vec<ReportRow> = ho
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| ReportRow {
            n: r.n,
            log_det: r.log_det,
            widom_rem: r.widom,
            ho_c_rem: r.ho_c,
            ho_d_rem: r.ho_d,
            ho_e_int: r.ho_e,
            tail: r.tail,
            ratio: r.ratio,
            trace_rem: traces.as_ref().and_then(|t| t.remainders[i]),
            trace_f_last: r.trace_f_last,
            removal: if config.m >= 2 && r.n >= 1 { removal_condition(&w, &p, config.m as u32, r.n).ok() } else { None },
        })
        .collect();

    let mut fits = BTreeMap::new();
    let window = config
        .thresholds
        .fit_window
        .map(|(lo, hi)| (lo as f64, hi as f64))
        .unwrap_or((0.0, f64::INFINITY));
    let primary: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| Some((r.n as f64, if config.m == 1 { r.widom_rem } else { r.ho_c_rem }?.norm())))
        .collect();
    fits.insert("remainder".to_string(), rate_fit(&primary, window).into());
    let tails: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.tail)).collect();
    fits.insert("tail".to_string(), rate_fit(&tails, window).into());
    if config.m >= 2 {
        let tf: Vec<(f64, f64)> = rows.iter().filter_map(|r| Some((r.n as f64, r.trace_f_last?.norm()))).collect();
        fits.insert("trace_f_last".to_string(), rate_fit(&tf, window).into());
    }
    if config.checks.hankel_sv {
        let sv = hankel_singular_values(&a, config.truncation);
        let pts: Vec<(f64, f64)> = sv.iter().enumerate().map(|(i, &s)| (i as f64, s)).collect();
        let (lo, hi) = config.thresholds.sv_window;
        fits.insert("hankel_sv".to_string(), rate_fit(&pts, (lo as f64, hi as f64)).into());
    }

    let truncation = if config.checks.truncation_bounds {
        match truncation_check(&pair, &schedule, config.truncation) {
            Ok(t) => Some(t),
            Err(e) => {
                errors.push(format!("truncation bounds: {e}"));
                None
            }
        }
    } else {
        None
    };

    let vanishing = if config.checks.vanishing {
        config.profile_symbol(&a).and_then(|f| match holder_seminorm(&f, &w, VANISHING_LEVELS) {
            Ok(p) => Some(p.vanishing),
            Err(e) => {
                errors.push(format!("modulus profile: {e}"));
                None
            }
        })
    } else {
        None
    };
    let ratios: Vec<Option<f64>> = rows.iter().map(|r| r.ratio).collect();
    let classification = classify(&ratios, config.thresholds.trend, vanishing);

    let constants = Constants {
        g: consts.g,
        log_g: consts.log_g,
        e1: consts.e1,
        log_e1: consts.log_e1,
        e1_source: consts.source,
        log_e_intercept: ho.log_e_intercept,
        intercept_spread: ho.intercept_spread,
        log_det_m_dual: ho.log_det_m_dual,
        duality_defect: consts.duality_defect,
        doubling_delta: consts.doubling_delta,
        stable: consts.stable,
        g_f: traces.as_ref().map(|t| t.g_f),
        e_f: traces.as_ref().and_then(|t| t.e_f),
    };
    Ok(AsymptoticsReport {
        name: config.name.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        factor,
        constants,
        rows,
        fits,
        classification,
        truncation,
        errors,
    })
}

/// `log det T_n` and the plain remainder for the `det-series` subcommand.
#[derive(Clone, Debug, Serialize)]
pub struct DetSeriesRow {
    pub n: usize,
    pub log_det: Option<C64>,
    pub widom_rem: Option<C64>,
}

pub fn run_det_series(config: &ScenarioConfig) -> Result<Vec<DetSeriesRow>> {
    let schedule = config.schedule();
    let (a, pair) = config.build_pair()?;
    let mut series = log_det_sequence(&a, schedule.last().copied().unwrap_or(0));
    series.refine(&a, &schedule);
    let consts = szego_constant(&a, &pair, config.truncation)?;
    Ok(schedule
        .iter()
        .map(|&n| {
            let ld = series.at(n);
            DetSeriesRow {
                n,
                log_det: ld,
                widom_rem: ld.map(|l| crate::linalg::nearest_branch(l - consts.log_g * (n + 1) as f64 - consts.log_e1, 0.0)),
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Float text with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt_re(z: Option<C64>) -> String {
    z.map(|z| fmt_float(z.re)).unwrap_or_default()
}

pub const CSV_HEADER: &str = "n,log_det_re,log_det_im,widom_rem,hoC_rem,hoD_rem,hoE_int,tail,ratio,trace_rem";

/// Report rows in the fixed column order; complex remainders contribute their real part.
pub fn render_csv(report: &AsymptoticsReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        let fields = [
            r.n.to_string(),
            opt_re(r.log_det),
            r.log_det.map(|z| fmt_float(z.im)).unwrap_or_default(),
            opt_re(r.widom_rem),
            opt_re(r.ho_c_rem),
            opt_re(r.ho_d_rem),
            opt_re(r.ho_e_int),
            fmt_float(r.tail),
            r.ratio.map(fmt_float).unwrap_or_default(),
            opt_re(r.trace_rem),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Compact JSON writer that prints every finite float with 17 significant digits.
struct SignificantDigits;

impl serde_json::ser::Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt_float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// JSON text of any serializable value; non-finite floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SignificantDigits);
    value.serialize(&mut ser).map_err(|e| LabError::Io(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| LabError::Io(e.to_string()))
}

pub fn render_json(report: &AsymptoticsReport) -> Result<String> {
    to_json(report)
}

/// Renders the report and writes it to `path` when one is given.
pub fn emit_report(report: &AsymptoticsReport, format: Format, path: Option<&Path>) -> Result<String> {
    let text = match format {
        Format::Csv => render_csv(report),
        Format::Json => render_json(report)?,
    };
    if let Some(p) = path {
        std::fs::write(p, &text).map_err(|e| LabError::Io(format!("{}: {e}", p.display())))?;
    }
    Ok(text)
}

/// Runs `f` on a pool of `workers` threads (all cores when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = workers {
        if k == 0 {
            return Err(LabError::Config("--workers must be at least 1".into()));
        }
        builder = builder.num_threads(k);
    }
    let pool = builder.build().map_err(|e| LabError::Config(e.to_string()))?;
    Ok(pool.install(f))
}
