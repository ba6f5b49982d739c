use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photostat::{reduce_stats, BeamStats, CountPair, JointStats, PairMoments};

/// Quantities frozen during the sample-free calibration phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    /// `⟨N_R⟩ / ⟨N_P⟩`.
    pub gamma: f64,
    pub sigma_gamma: f64,
    pub fano_p: f64,
    pub fano_r: f64,
    pub mean_np: f64,
    pub mean_nr: f64,
    /// Reference weight of the optimized estimator, `Cov(N_P,N_R)/Var(N_R)`.
    pub k_opt: f64,
    /// Bias offset of the optimized estimator. Zero: centring the reference
    /// on its calibration mean already makes the estimator unbiased.
    pub delta_e: f64,
    pub trials: u64,
    pub stats: JointStats,
}

impl CalibrationRecord {
    pub fn from_stats(stats: JointStats) -> Result<Self> {
        if !(stats.probe.mean > 0.0 && stats.reference.mean > 0.0) {
            return Err(Error::DegenerateInput(format!(
                "calibration needs positive means on both arms (probe {}, reference {})",
                stats.probe.mean, stats.reference.mean
            )));
        }
        // A noiseless reference carries no information about probe noise.
        let k_opt =
            if stats.reference.variance > 0.0 { stats.covariance / stats.reference.variance } else { 0.0 };
        Ok(Self {
            gamma: stats.reference.mean / stats.probe.mean,
            sigma_gamma: stats.nrf_gamma,
            fano_p: stats.probe.fano_or_nan(),
            fano_r: stats.reference.fano_or_nan(),
            mean_np: stats.probe.mean,
            mean_nr: stats.reference.mean,
            k_opt,
            delta_e: 0.0,
            trials: stats.samples,
            stats,
        })
    }

    /// A hand-built record with Poissonian, uncorrelated arms; handy for
    /// evaluating estimators on fixed numbers.
    pub fn from_parts(gamma: f64, mean_np: f64, k_opt: f64) -> Self {
        let mean_nr = gamma * mean_np;
        let stats = JointStats {
            probe: BeamStats::new(mean_np, mean_np),
            reference: BeamStats::new(mean_nr, mean_nr),
            covariance: 0.0,
            gamma,
            nrf_gamma: 0.5 * (1.0 + gamma),
            samples: 0,
        };
        Self {
            gamma,
            sigma_gamma: stats.nrf_gamma,
            fano_p: 1.0,
            fano_r: 1.0,
            mean_np,
            mean_nr,
            k_opt,
            delta_e: 0.0,
            trials: 0,
            stats,
        }
    }

    pub fn moments(&self) -> PairMoments {
        self.stats.moments()
    }

    /// Weight minimizing the optimized estimator's variance at loss `alpha`.
    pub fn weight_for_loss(&self, alpha: f64) -> f64 {
        (1.0 - alpha) * self.k_opt
    }

    pub fn adapted_to_loss(&self, alpha: f64) -> Self {
        Self { k_opt: self.weight_for_loss(alpha), ..*self }
    }
}

/// Freeze γ, σ_γ, Fano factors, means and the optimized weight from
/// sample-free pairs.
pub fn calibrate(no_sample_pairs: &[CountPair]) -> Result<CalibrationRecord> {
    let stats = reduce_stats(no_sample_pairs, None)?;
    CalibrationRecord::from_stats(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photostat::{sample_poisson, RandomStream};

    #[test]
    fn identical_arms() {
        let pairs: Vec<CountPair> = [5, 8, 2, 9, 4].iter().map(|&k| CountPair::new(k, k)).collect();
        let c = calibrate(&pairs).unwrap();
        assert_eq!(c.gamma, 1.0);
        assert_eq!(c.sigma_gamma, 0.0);
        assert!((c.k_opt - 1.0).abs() < 1e-12);
        assert_eq!(c.delta_e, 0.0);
        assert_eq!(c.trials, 5);
    }

    #[test]
    fn independent_poisson_weight_vanishes() {
        let mut rng = RandomStream::from_seed(3);
        let pairs: Vec<CountPair> = (0..200_000)
            .map(|_| {
                CountPair::new(
                    sample_poisson(400.0, &mut rng).unwrap(),
                    sample_poisson(400.0, &mut rng).unwrap(),
                )
            })
            .collect();
        let c = calibrate(&pairs).unwrap();
        assert!(c.k_opt.abs() < 0.01, "k = {}", c.k_opt);
    }

    #[test]
    fn rejects_empty_reference() {
        let pairs = [CountPair::new(3, 0), CountPair::new(5, 0)];
        assert!(calibrate(&pairs).is_err());
        assert!(matches!(calibrate(&[CountPair::new(1, 1)]), Err(Error::InsufficientData { .. })));
    }
}
