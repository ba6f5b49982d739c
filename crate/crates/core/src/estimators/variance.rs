//! Closed-form estimator variances.
//!
//! All formulas are expressed through the sample-free statistics: `⟨N_P⟩` is
//! the probe mean without the sample, `F_P`, `F_R` the measured Fano factors,
//! `γ = ⟨N_R⟩/⟨N_P⟩` and `σ_γ` the weighted noise reduction factor. The
//! sample acts as an extra binomial thinning of transmission `1 − α`.

use super::EstimatorKind;
use crate::channels::{theoretical_joint_stats, ChannelConfig, SourceModel};
use crate::error::{check_unit, Error, Result};
use crate::photostat::JointStats;

fn uql2(alpha: f64, mean_np: f64) -> f64 {
    alpha * (1.0 - alpha) / mean_np
}

/// Ratio estimator: `U_uql² + (1−α)²/⟨N_P⟩ · 2σ_γ/γ`.
pub fn ratio_variance(alpha: f64, mean_np: f64, gamma: f64, sigma_gamma: f64) -> f64 {
    uql2(alpha, mean_np) + (1.0 - alpha).powi(2) / mean_np * 2.0 * sigma_gamma / gamma
}

/// Ratio estimator on independent coherent beams, `σ_γ = (1+γ)/2`.
pub fn coherent_pair_variance(alpha: f64, mean_np: f64, gamma: f64) -> f64 {
    uql2(alpha, mean_np) + (1.0 - alpha).powi(2) / mean_np * (1.0 + gamma) / gamma
}

/// Ratio estimator on uncorrelated beams, `σ_γ = (F_R + γF_P)/2`.
pub fn uncorrelated_variance(alpha: f64, mean_np: f64, gamma: f64, fano_p: f64, fano_r: f64) -> f64 {
    uql2(alpha, mean_np) + (1.0 - alpha).powi(2) / mean_np * (fano_r / gamma + fano_p)
}

/// Ratio estimator on a twin beam with equal detection efficiency `eta`.
pub fn twb_balanced_variance(alpha: f64, mean_np: f64, eta: f64) -> f64 {
    uql2(alpha, mean_np) + 2.0 * (1.0 - alpha).powi(2) / mean_np * (1.0 - eta)
}

/// Ratio estimator on balanced classically correlated beams:
/// `(1−α)(2−α)/⟨N_P⟩`.
pub fn balanced_ccb_variance(alpha: f64, mean_np: f64) -> f64 {
    (1.0 - alpha) * (2.0 - alpha) / mean_np
}

/// Optimized estimator, symmetric arms (`γ = 1`, `F_P = F_R = F`):
/// `U_uql² + (1−α)²/⟨N_P⟩ · σ(2 − σ/F)`.
pub fn optimized_symmetric_variance(alpha: f64, mean_np: f64, sigma: f64, fano: f64) -> f64 {
    uql2(alpha, mean_np) + (1.0 - alpha).powi(2) / mean_np * sigma * (2.0 - sigma / fano)
}

/// Optimized estimator on a twin beam with equal efficiency `eta` and
/// occupation per mode ≪ 1: `U_uql² + (1−α)²(1−η²)/⟨N_P⟩`.
pub fn optimized_twb_variance(alpha: f64, mean_np: f64, eta: f64) -> f64 {
    uql2(alpha, mean_np) + (1.0 - alpha).powi(2) / mean_np * (1.0 - eta * eta)
}

/// Differential estimator for arms with equal local statistics:
/// `[2(1−α)σ_γ + α + (F_R−1)α²] / (γ⟨N_P⟩)`.
pub fn differential_variance(alpha: f64, mean_np: f64, gamma: f64, sigma_gamma: f64, fano_r: f64) -> f64 {
    (2.0 * (1.0 - alpha) * sigma_gamma + alpha + (fano_r - 1.0) * alpha * alpha) / (gamma * mean_np)
}

/// Single-beam estimator: `U_uql² + (1−α)² F_P/⟨N_P⟩`; equals `U_coh²` for a
/// Poissonian probe.
pub fn single_beam_variance(alpha: f64, mean_np: f64, fano_p: f64) -> f64 {
    uql2(alpha, mean_np) + (1.0 - alpha).powi(2) * fano_p / mean_np
}

/// Variance of one estimate of `kind` at loss `alpha`, from sample-free
/// statistics `stats`.
///
/// The ratio and single-beam forms are the first-order propagation results
/// above. The optimized estimator's variance
/// `Var(N'_P − k·N_R) = (1−α)²V_P + α(1−α)⟨N_P⟩ − 2k(1−α)C + k²V_R`
/// is minimized over the weight `k` at the vertex `k = (1−α)C/V_R`. The
/// differential estimator uses its exact second-moment expansion, which
/// reduces to [`differential_variance`] for symmetric arms.
pub fn variance_from_stats(kind: EstimatorKind, stats: &JointStats, alpha: f64) -> Result<f64> {
    check_unit("alpha", alpha)?;
    let n_p = stats.probe.mean;
    let n_r = stats.reference.mean;
    let (v_p, v_r, cov) = (stats.probe.variance, stats.reference.variance, stats.covariance);
    let gamma = stats.gamma;
    let keep = 1.0 - alpha;
    if n_p.is_nan() || n_p <= 0.0 {
        return Err(Error::DegenerateInput("probe mean must be positive".into()));
    }
    // Variance of the thinned probe count.
    let v_probe = keep * keep * v_p + alpha * keep * n_p;
    match kind {
        EstimatorKind::Ratio => {
            if n_r.is_nan() || n_r <= 0.0 {
                return Err(Error::Unsupported("ratio estimator with an empty reference arm".into()));
            }
            Ok(ratio_variance(alpha, n_p, gamma, stats.nrf_gamma))
        }
        EstimatorKind::SingleBeam => Ok(v_probe / (n_p * n_p)),
        EstimatorKind::Optimized => {
            let reduction = if v_r > 0.0 { keep * keep * cov * cov / v_r } else { 0.0 };
            Ok((v_probe - reduction) / (n_p * n_p))
        }
        EstimatorKind::Differential => {
            if n_r.is_nan() || n_r <= 0.0 {
                return Err(Error::Unsupported("differential estimator with an empty reference arm".into()));
            }
            let num = v_r + gamma * gamma * v_probe - 2.0 * gamma * keep * cov;
            Ok(num / (n_r * n_r))
        }
    }
}

/// Predicted variance of `kind` for source `src` detected through `cfg`,
/// at sample loss `alpha`. `cfg.alpha` is ignored: the calibration
/// statistics are those without the sample.
pub fn theory_variance(
    kind: EstimatorKind,
    src: &SourceModel,
    cfg: &ChannelConfig,
    alpha: f64,
) -> Result<f64> {
    let calib = cfg.with_alpha(0.0);
    let stats = theoretical_joint_stats(src, &calib)?;
    variance_from_stats(kind, &stats, alpha)
}
