//! Absorption estimators, their calibration, and their uncertainties.
//!
//! Four estimators of the sample loss α are provided, all fed by a
//! [`CalibrationRecord`] measured with the sample removed:
//!
//! | kind           | value                                     |
//! |----------------|-------------------------------------------|
//! | `Ratio`        | `1 − γ·N'_P / N_R`                        |
//! | `Optimized`    | `1 − (N'_P − k·(N_R − ⟨N_R⟩) + δE) / ⟨N_P⟩` |
//! | `Differential` | `(N_R − γ·N'_P) / ⟨N_R⟩`                  |
//! | `SingleBeam`   | `1 − γ·N'_P / ⟨N_R⟩`                      |

mod bounds;
mod calibration;
mod variance;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photostat::{CountPair, RunningStats};

pub use bounds::{bound, BoundKind};
pub use calibration::{calibrate, CalibrationRecord};
pub use variance::{
    balanced_ccb_variance, coherent_pair_variance, differential_variance, optimized_symmetric_variance,
    optimized_twb_variance, ratio_variance, single_beam_variance, theory_variance, twb_balanced_variance,
    uncorrelated_variance, variance_from_stats,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Ratio,
    Optimized,
    Differential,
    SingleBeam,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Ratio,
        EstimatorKind::Optimized,
        EstimatorKind::Differential,
        EstimatorKind::SingleBeam,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Ratio => "ratio",
            EstimatorKind::Optimized => "optimized",
            EstimatorKind::Differential => "differential",
            EstimatorKind::SingleBeam => "single_beam",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator `{s}`")))
    }
}

/// `1 − γ·n_p / n_r`.
pub fn estimate_ratio(pair: CountPair, cal: &CalibrationRecord) -> Result<f64> {
    if pair.n_r == 0 {
        return Err(Error::DegenerateDenominator);
    }
    Ok(1.0 - cal.gamma * pair.n_p as f64 / pair.n_r as f64)
}

/// `1 − (n_p − k·(n_r − ⟨N_R⟩) + δE) / ⟨N_P⟩` with `k = cal.k_opt`.
pub fn estimate_optimized(pair: CountPair, cal: &CalibrationRecord) -> f64 {
    let centered_ref = pair.n_r as f64 - cal.mean_nr;
    1.0 - (pair.n_p as f64 - cal.k_opt * centered_ref + cal.delta_e) / cal.mean_np
}

/// `(n_r − γ·n_p) / ⟨N_R⟩`.
pub fn estimate_differential(pair: CountPair, cal: &CalibrationRecord) -> f64 {
    (pair.n_r as f64 - cal.gamma * pair.n_p as f64) / cal.mean_nr
}

/// `1 − γ·n_p / ⟨N_R⟩`: the reference is replaced by its calibration mean.
pub fn estimate_single_beam(pair: CountPair, cal: &CalibrationRecord) -> f64 {
    1.0 - cal.gamma * pair.n_p as f64 / cal.mean_nr
}

pub fn estimate(kind: EstimatorKind, pair: CountPair, cal: &CalibrationRecord) -> Result<f64> {
    match kind {
        EstimatorKind::Ratio => estimate_ratio(pair, cal),
        EstimatorKind::Optimized => Ok(estimate_optimized(pair, cal)),
        EstimatorKind::Differential => Ok(estimate_differential(pair, cal)),
        EstimatorKind::SingleBeam => Ok(estimate_single_beam(pair, cal)),
    }
}

/// Per-trial estimates over a block of measurement pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEstimate {
    pub kind: EstimatorKind,
    pub values: Vec<f64>,
    /// Trials dropped because the estimator was undefined (`n_r = 0`).
    pub exclusions: u64,
    /// Weight actually applied by the optimized estimator.
    pub weight: Option<f64>,
}

impl BlockEstimate {
    pub fn stats(&self) -> RunningStats {
        self.values.iter().copied().collect()
    }
}

/// Evaluate `kind` on every pair of a measurement block.
///
/// The optimized estimator's variance-minimizing weight at loss α is
/// `(1−α)·Cov/Var(N_R)`, while calibration only yields the α = 0 value. The
/// block is therefore first reduced with the ratio estimator, and the
/// calibrated weight is scaled by `1 − α̂`. No absolute efficiency enters.
pub fn estimate_block(kind: EstimatorKind, pairs: &[CountPair], cal: &CalibrationRecord) -> BlockEstimate {
    let mut exclusions = 0;
    let mut weight = None;
    let values: Vec<f64> = match kind {
        EstimatorKind::Ratio => pairs
            .iter()
            .filter_map(|&p| match estimate_ratio(p, cal) {
                Ok(v) => Some(v),
                Err(_) => {
                    exclusions += 1;
                    None
                }
            })
            .collect(),
        EstimatorKind::Optimized => {
            let pilot = estimate_block(EstimatorKind::Ratio, pairs, cal);
            let alpha_hat = if pilot.values.is_empty() { 0.0 } else { pilot.stats().mean().clamp(0.0, 1.0) };
            let adapted = cal.adapted_to_loss(alpha_hat);
            weight = Some(adapted.k_opt);
            pairs.iter().map(|&p| estimate_optimized(p, &adapted)).collect()
        }
        EstimatorKind::Differential => pairs.iter().map(|&p| estimate_differential(p, cal)).collect(),
        EstimatorKind::SingleBeam => pairs.iter().map(|&p| estimate_single_beam(p, cal)).collect(),
    };
    BlockEstimate { kind, values, exclusions, weight }
}
