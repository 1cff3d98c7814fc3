//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and fails if any fails.

use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_xorshift::XorShiftRng;
use serde_json::json;

use toeplitz_lab::determinants::{
    geometric_mean, log_det_sequence, log_e1_truncated, regularized_det, regularized_det_direct, szego_constant,
};
use toeplitz_lab::factorization::scalar_canonical_factor;
use toeplitz_lab::harness::{hankel_singular_values, rate_fit, run_scenario, DeltaClass, ScenarioConfig};
use toeplitz_lab::linalg::{spectral_norm, CMat, C64};
use toeplitz_lab::operators::OpTruncation;
use toeplitz_lab::symbols::FourierSymbol;
use toeplitz_lab::traces::{ef_constant, gf_constant, trace_f, trace_remainder, trace_square, AnalyticFunctionSpec, ContourSpec};

type Outcome = Result<String, String>;

fn tridiagonal() -> FourierSymbol {
    FourierSymbol::scalar_real(&[(-1, -0.3), (0, 1.15), (1, -0.5)])
}

fn exp_cos() -> FourierSymbol {
    FourierSymbol::scalar_real(&[(-1, 0.1), (1, 0.1)]).exp_scalar(64).unwrap()
}

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn config(v: serde_json::Value) -> Result<ScenarioConfig, String> {
    ScenarioConfig::from_json(&v.to_string()).map_err(|e| e.to_string())
}

fn tridiagonal_exactness() -> Outcome {
    let a = tridiagonal();
    let series = log_det_sequence(&a, 64);
    let mut worst = 0.0f64;
    for n in 0..=64 {
        let exact = (1.0 - 0.15f64.powi(n as i32 + 2)) / 0.85;
        let got = series.at(n).ok_or(format!("no determinant at n = {n}"))?.exp();
        worst = worst.max((got - exact).norm() / exact);
    }
    let g = geometric_mean(&a).map_err(|e| e.to_string())?;
    let pair = scalar_canonical_factor(&a, 64).map_err(|e| e.to_string())?;
    let consts = szego_constant(&a, &pair, 256).map_err(|e| e.to_string())?;
    let truncated = log_e1_truncated(&a, 256).map_err(|e| e.to_string())?.exp();
    let e_err = (consts.e1 - 1.0 / 0.85).norm().max((truncated - 1.0 / 0.85).norm());
    let g_err = (g - 1.0).norm();
    ensure(
        worst <= 1e-10 && g_err <= 1e-12 && e_err <= 1e-8,
        format!("det rel err {worst:.2e}, |G-1| {g_err:.2e}, |E1-1/0.85| {e_err:.2e}"),
    )
}

fn duality() -> Outcome {
    let mut msgs = Vec::new();
    let mut ok = true;
    for (name, a) in [("tridiagonal", tridiagonal()), ("exp(0.2cos)", exp_cos())] {
        let pair = scalar_canonical_factor(&a, 64).map_err(|e| e.to_string())?;
        let c = szego_constant(&a, &pair, 256).map_err(|e| e.to_string())?;
        ok &= c.duality_defect <= 1e-6;
        msgs.push(format!("{name} defect {:.2e}", c.duality_defect));
    }
    ensure(ok, msgs.join(", "))
}

fn det_m_cross_validation() -> Outcome {
    let mut rng = XorShiftRng::seed_from_u64(20);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let raw = CMat::from_fn(16, 16, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let scale = rng.random_range(0.1..0.95) / spectral_norm(&raw);
        let k = OpTruncation::new(16, 1, raw * C64::new(scale, 0.0), "random contraction").map_err(|e| e.to_string())?;
        for m in 1..=3 {
            let via_eigen = regularized_det(&k, m).map_err(|e| e.to_string())?;
            let direct = regularized_det_direct(&k, m).map_err(|e| e.to_string())?;
            worst = worst.max((via_eigen - direct).norm() / direct.norm().max(1.0));
        }
    }
    ensure(worst <= 1e-8, format!("max disagreement {worst:.2e} over 60 cases"))
}

fn hankel_decay() -> Outcome {
    let a = FourierSymbol::exp_lacunary(0.3, 0.4, 12, 16384).map_err(|e| e.to_string())?;
    let sv = hankel_singular_values(&a, 2048);
    let pts: Vec<(f64, f64)> = sv.iter().enumerate().map(|(i, &s)| (i as f64, s)).collect();
    let fit = rate_fit(&pts, (8.0, 128.0)).map_err(|e| e.to_string())?;
    ensure((-0.5..=-0.3).contains(&fit.slope), format!("slope {:.4} (stderr {:.3})", fit.slope, fit.confidence))
}

fn lacunary_m2() -> Result<toeplitz_lab::harness::AsymptoticsReport, String> {
    let cfg = config(json!({
        "symbol": {"type": "exp_lacunary", "gamma": 0.3, "levels": 9, "amplitude": 0.5, "band": 4096},
        "omega": {"gamma": 0.3},
        "m": 2,
        "schedule": [32, 64, 128, 256],
        "checks": {"hankel_sv": false, "truncation_bounds": false, "vanishing": false}
    }))?;
    run_scenario(&cfg).map_err(|e| e.to_string())
}

fn higher_order_gain() -> Outcome {
    let r = lacunary_m2()?;
    let mut gain = true;
    let mut ratios = Vec::new();
    for row in &r.rows {
        let (c, w) = (row.ho_c_rem.ok_or("missing hoC")?.norm(), row.widom_rem.ok_or("missing widom")?.norm());
        gain &= c <= w;
        ratios.push(row.ratio.ok_or("missing ratio")?);
    }
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure(gain && lo > 0.0 && hi / lo <= 5.0, format!("|hoC| <= |widom|: {gain}, ratio band {:.2}", hi / lo))
}

fn removal(gamma: f64, m: usize) -> Result<(bool, f64), String> {
    let cfg = config(json!({
        "symbol": {"type": "exp_lacunary", "gamma": gamma, "levels": 9, "amplitude": 0.5, "band": 4096},
        "omega": {"gamma": gamma},
        "m": m,
        "schedule": [32, 64, 128, 256],
        "checks": {"hankel_sv": false, "truncation_bounds": false, "vanishing": false}
    }))?;
    let r = run_scenario(&cfg).map_err(|e| e.to_string())?;
    let cond: Vec<f64> = r.rows.iter().map(|x| x.removal.unwrap_or(f64::INFINITY)).collect();
    let decreasing = cond.windows(2).all(|w| w[1] < w[0]) && cond.last().is_some_and(|&c| c < 0.5 * cond[0]);
    let last = r.rows.last().ok_or("empty schedule")?;
    let (c, d) = (last.ho_c_rem.ok_or("missing hoC")?, last.ho_d_rem.ok_or("missing hoD")?);
    Ok((decreasing, (c - d).norm() / c.norm()))
}

fn removal_condition_check() -> Outcome {
    let (pos_dec, pos) = removal(0.3, 3)?;
    let (neg_dec, neg) = removal(0.25, 2)?;
    ensure(
        pos_dec && pos < 0.1 && !neg_dec && neg >= 0.1,
        format!("removable (γ=0.3, m=3): decreasing {pos_dec}, |hoC-hoD|/|hoC| {pos:.3}; control (γ=0.25, m=2): decreasing {neg_dec}, {neg:.3}"),
    )
}

fn trace_identity() -> Outcome {
    let a = FourierSymbol::scalar_real(&[(-1, 1.0), (1, 1.0)]);
    let sq = AnalyticFunctionSpec::polynomial(&[0.0, 0.0, 1.0]);
    for n in 1..=64usize {
        let t = trace_square(&a, n);
        let exact = trace_f(&a, &sq, n).map_err(|e| e.to_string())?.exact.ok_or("no exact trace")?;
        let expect = 2.0 * (n as f64 + 1.0) - 2.0;
        if t != C64::new(expect, 0.0) || exact != C64::new(expect, 0.0) {
            return Err(format!("n = {n}: tr = {t}, exact = {exact}"));
        }
    }
    let b = exp_cos();
    let g = gf_constant(&b, &sq).map_err(|e| e.to_string())?;
    let contour = ContourSpec { center: C64::new(1.0, 0.0), radius: 1.0, nodes: 64, margin: None };
    let e = ef_constant(&b, &sq, &contour, 256).map_err(|e| e.to_string())?.value;
    let mut worst = 0.0f64;
    for n in [64usize, 96, 128] {
        let t = trace_f(&b, &sq, n).map_err(|e| e.to_string())?;
        worst = worst.max(trace_remainder(&t, g, e).norm());
    }
    ensure(worst < 1e-8, format!("t+1/t exact for n <= 64; exp(0.2cos) remainder {worst:.2e} for n >= 64"))
}

fn contour_constant() -> Outcome {
    let a = tridiagonal();
    let log = AnalyticFunctionSpec::log();
    let target = -(0.85f64.ln());
    let mut values = Vec::new();
    for radius in [0.9, 1.125] {
        let contour = ContourSpec { center: C64::new(1.15, 0.0), radius, nodes: 64, margin: Some(0.01) };
        values.push(ef_constant(&a, &log, &contour, 256).map_err(|e| e.to_string())?.value);
    }
    let err = values.iter().map(|v| (v - target).norm()).fold(0.0, f64::max);
    let spread = (values[0] - values[1]).norm();
    ensure(err <= 1e-6 && spread <= 1e-6, format!("max |E_f + log 0.85| {err:.2e}, radius change moved it {spread:.2e}"))
}

fn truncation_bounds() -> Outcome {
    let families = [
        ("tridiagonal", json!({"type": "laurent", "coeffs": [
            {"k": -1, "re": [[-0.3]]}, {"k": 0, "re": [[1.15]]}, {"k": 1, "re": [[-0.5]]}]}), 0.9),
        ("lacunary", json!({"type": "exp_lacunary", "gamma": 0.3, "levels": 9, "amplitude": 0.5, "band": 4096}), 0.3),
    ];
    let mut msgs = Vec::new();
    let mut ok = true;
    for (name, symbol, gamma) in families {
        let cfg = config(json!({
            "symbol": symbol,
            "omega": {"gamma": gamma},
            "schedule": [8, 16, 32, 64, 128],
            "checks": {"hankel_sv": false, "truncation_bounds": true, "vanishing": false}
        }))?;
        let r = run_scenario(&cfg).map_err(|e| e.to_string())?;
        let t = r.truncation.ok_or("no truncation check")?;
        let mut early = [0.0f64; 4];
        let mut all = [0.0f64; 4];
        let mut finite = true;
        for s in &t.samples {
            for (k, ratio) in s.ratios().into_iter().enumerate() {
                finite &= ratio.is_finite();
                all[k] = all[k].max(ratio);
                if s.n <= 16 {
                    early[k] = early[k].max(ratio);
                }
            }
        }
        let growth = (0..4).map(|k| if all[k] > 0.0 { all[k] / early[k] } else { 1.0 }).fold(0.0, f64::max);
        ok &= finite && growth <= 2.0;
        msgs.push(format!("{name}: max ratio {:.3}, growth over n <= 16 {growth:.2}", all.iter().cloned().fold(0.0, f64::max)));
    }
    ensure(ok, msgs.join("; "))
}

fn delta_dichotomy() -> Outcome {
    let run = |gamma: f64| -> Result<(DeltaClass, Option<f64>, Option<bool>), String> {
        let cfg = config(json!({
            "symbol": {"type": "exp_lacunary", "gamma": gamma, "levels": 12, "amplitude": 0.5},
            "omega": {"gamma": 0.6},
            "schedule": {"start": 16, "stop": 512, "factor": 2},
            "checks": {"hankel_sv": false, "truncation_bounds": false, "vanishing": true}
        }))?;
        let r = run_scenario(&cfg).map_err(|e| e.to_string())?;
        Ok((r.classification.class, r.classification.trend, r.classification.vanishing))
    };
    let (little, t0, v0) = run(0.9)?;
    let (sharp, t1, v1) = run(0.6)?;
    ensure(
        little == DeltaClass::LittleO && sharp == DeltaClass::BigO,
        format!("vanishing-modulus symbol: {little:?} (trend {t0:.3?}, vanishing {v0:?}); sharp symbol: {sharp:?} (trend {t1:.3?}, vanishing {v1:?})"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("tridiagonal exactness", tridiagonal_exactness),
        ("constant duality", duality),
        ("det_m cross-validation", det_m_cross_validation),
        ("Hankel singular value decay", hankel_decay),
        ("higher-order gain", higher_order_gain),
        ("removal of the last correction", removal_condition_check),
        ("trace identity", trace_identity),
        ("contour constant", contour_constant),
        ("truncation bounds", truncation_bounds),
        ("remainder dichotomy", delta_dichotomy),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS criterion {:>2} {name}: {msg} [{secs:.1}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name}: {msg} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
