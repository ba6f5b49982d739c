//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string. The logic
//! lives in the `*_json` functions so it can be tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use twinloss::channels::{apply_channel, ChannelConfig, SourceModel};
use twinloss::estimators::{bound, calibrate, estimate_block, theory_variance, BoundKind, EstimatorKind};
use twinloss::photostat::{CountPair, RandomStream};
use twinloss::simlab::invert_efficiency;

/// Occupation per mode of the simulated twin beam; far below one, as in a
/// broadband down-conversion source.
const MEAN_PER_MODE: f64 = 1e-3;
const MAX_TRIALS: u32 = 200_000;

#[derive(Serialize)]
struct Curves {
    alpha: Vec<f64>,
    ratio: Vec<f64>,
    optimized: Vec<f64>,
    differential: Vec<f64>,
    single_beam: Vec<f64>,
    bccb: Vec<f64>,
    uql: Vec<f64>,
    coherent: Vec<f64>,
}

fn twin_beam(mean_np: f64, eta_p: f64) -> Result<SourceModel, String> {
    if mean_np.is_nan() || mean_np < 1.0 || eta_p.is_nan() || eta_p <= 0.0 {
        return Err("need at least one detected photon and eta_p > 0".into());
    }
    let modes = (mean_np / eta_p / MEAN_PER_MODE).round() as u64;
    SourceModel::twin_beam(MEAN_PER_MODE, modes.max(1)).map_err(|e| e.to_string())
}

/// Theoretical standard deviations of every estimator over `points` values
/// of α in [0, 0.99].
pub fn theory_curves_json(eta_p: f64, eta_r: f64, mean_np: f64, points: u32) -> Result<String, String> {
    let src = twin_beam(mean_np, eta_p)?;
    let cfg = ChannelConfig::new(eta_p, eta_r, 1.0, 0.0).map_err(|e| e.to_string())?;
    let n = points.clamp(2, 500);
    let mut c = Curves {
        alpha: Vec::new(),
        ratio: Vec::new(),
        optimized: Vec::new(),
        differential: Vec::new(),
        single_beam: Vec::new(),
        bccb: Vec::new(),
        uql: Vec::new(),
        coherent: Vec::new(),
    };
    for i in 0..n {
        let alpha = 0.99 * i as f64 / (n - 1) as f64;
        let std = |k| theory_variance(k, &src, &cfg, alpha).map(f64::sqrt).map_err(|e| e.to_string());
        let b = |k| bound(k, alpha, mean_np).map_err(|e| e.to_string());
        c.alpha.push(alpha);
        c.ratio.push(std(EstimatorKind::Ratio)?);
        c.optimized.push(std(EstimatorKind::Optimized)?);
        c.differential.push(std(EstimatorKind::Differential)?);
        c.single_beam.push(std(EstimatorKind::SingleBeam)?);
        c.bccb.push(b(BoundKind::BalancedCcb)?);
        c.uql.push(b(BoundKind::Uql)?);
        c.coherent.push(b(BoundKind::Coherent)?);
    }
    serde_json::to_string(&c).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct PointResult {
    estimator: String,
    mean: f64,
    std: f64,
    theory_std: Option<f64>,
}

/// Monte Carlo of one (η_P, η_R, α) point: a sample-free calibration block
/// and a measurement block of `trials` twin-beam pairs each. The balanced
/// classical benchmark reads the reference of an independent pair.
pub fn simulate_point_json(
    eta_p: f64,
    eta_r: f64,
    alpha: f64,
    mean_np: f64,
    trials: u32,
    seed: u32,
) -> Result<String, String> {
    let src = twin_beam(mean_np, eta_p)?;
    let cfg = ChannelConfig::new(eta_p, eta_r, 1.0, alpha).map_err(|e| e.to_string())?;
    let trials = trials.clamp(10, MAX_TRIALS) as usize;
    let mut rng = RandomStream::from_seed(u64::from(seed));
    let mut block = |cfg: &ChannelConfig| -> Result<(Vec<CountPair>, Vec<CountPair>), String> {
        let mut correlated = Vec::with_capacity(trials);
        let mut displaced = Vec::with_capacity(trials);
        for _ in 0..trials {
            let a = apply_channel(src.sample(&mut rng), cfg, &mut rng).map_err(|e| e.to_string())?;
            let b = apply_channel(src.sample(&mut rng), cfg, &mut rng).map_err(|e| e.to_string())?;
            correlated.push(a);
            displaced.push(CountPair::new(a.n_p, b.n_r));
        }
        Ok((correlated, displaced))
    };
    let (cal_pairs, cal_displaced) = block(&cfg.with_alpha(0.0))?;
    let (pairs, displaced) = block(&cfg)?;
    let cal = calibrate(&cal_pairs).map_err(|e| e.to_string())?;
    let cal_displaced = calibrate(&cal_displaced).map_err(|e| e.to_string())?;

    let mut out = Vec::new();
    for kind in EstimatorKind::ALL {
        let s = estimate_block(kind, &pairs, &cal).stats();
        out.push(PointResult {
            estimator: kind.as_str().to_string(),
            mean: s.mean(),
            std: s.std_dev(),
            theory_std: theory_variance(kind, &src, &cfg, alpha).ok().map(f64::sqrt),
        });
    }
    let s = estimate_block(EstimatorKind::Ratio, &displaced, &cal_displaced).stats();
    out.push(PointResult {
        estimator: "bccb".into(),
        mean: s.mean(),
        std: s.std_dev(),
        theory_std: bound(BoundKind::BalancedCcb, alpha, cal.mean_np).ok(),
    });
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// η_R from calibration values γ and σ_γ.
pub fn invert_efficiency_json(gamma: f64, sigma_gamma: f64, eta_coll: f64) -> Result<String, String> {
    let mut cal = twinloss::estimators::CalibrationRecord::from_parts(gamma, 1.0, 0.0);
    cal.sigma_gamma = sigma_gamma;
    let eta_r = invert_efficiency(&cal, eta_coll).map_err(|e| e.to_string())?;
    serde_json::to_string(&serde_json::json!({ "eta_r": eta_r })).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn theory_curves(eta_p: f64, eta_r: f64, mean_np: f64, points: u32) -> Result<String, JsError> {
    theory_curves_json(eta_p, eta_r, mean_np, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate_point(
    eta_p: f64,
    eta_r: f64,
    alpha: f64,
    mean_np: f64,
    trials: u32,
    seed: u32,
) -> Result<String, JsError> {
    simulate_point_json(eta_p, eta_r, alpha, mean_np, trials, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn invert_efficiency_demo(gamma: f64, sigma_gamma: f64, eta_coll: f64) -> Result<String, JsError> {
    invert_efficiency_json(gamma, sigma_gamma, eta_coll).map_err(|e| JsError::new(&e))
}
