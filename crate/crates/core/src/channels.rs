//! Photon sources and the loss channels that act on them.
//!
//! Every loss (sample absorption, detector inefficiency, imperfect collection
//! of correlated photons) is modelled as binomial thinning. Thinnings on the
//! same arm compose multiplicatively and commute, so each arm is thinned once
//! with the product of its survival probabilities.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, check_unit, Error, Result};
use crate::photostat::samplers::{
    binomial_unchecked, gamma_poisson_unchecked, poisson_unchecked, thermal_unchecked,
};
use crate::photostat::{CountPair, JointStats, PairMoments, RandomStream};

/// Detection and loss parameters of the two arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    /// Probe detection efficiency η_P.
    pub eta_p: f64,
    /// Reference detection efficiency η_R.
    pub eta_r: f64,
    /// Fraction of a detected probe photon's twin landing in the reference region.
    pub eta_coll: f64,
    /// Sample loss α on the probe arm.
    pub alpha: f64,
}

impl ChannelConfig {
    pub fn new(eta_p: f64, eta_r: f64, eta_coll: f64, alpha: f64) -> Result<Self> {
        let cfg = Self { eta_p, eta_r, eta_coll, alpha };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Perfect detection, no sample.
    pub const fn ideal() -> Self {
        Self { eta_p: 1.0, eta_r: 1.0, eta_coll: 1.0, alpha: 0.0 }
    }

    /// Equal detection efficiency on both arms, full collection.
    pub fn balanced(eta: f64, alpha: f64) -> Result<Self> {
        Self::new(eta, eta, 1.0, alpha)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("eta_p", self.eta_p)?;
        check_unit("eta_r", self.eta_r)?;
        check_unit("eta_coll", self.eta_coll)?;
        check_unit("alpha", self.alpha)
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    /// Overall probe survival `(1−α)·η_P`.
    pub fn probe_survival(&self) -> f64 {
        (1.0 - self.alpha) * self.eta_p
    }

    /// Overall reference survival `η_coll·η_R`.
    pub fn reference_survival(&self) -> f64 {
        self.eta_coll * self.eta_r
    }
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self::ideal()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    TwinBeam,
    CoherentPair,
    FockPair,
    SplitClassical,
    IndependentThermal,
}

impl SourceKind {
    pub const ALL: [SourceKind; 5] = [
        SourceKind::TwinBeam,
        SourceKind::CoherentPair,
        SourceKind::FockPair,
        SourceKind::SplitClassical,
        SourceKind::IndependentThermal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SourceKind::TwinBeam => "twin_beam",
            SourceKind::CoherentPair => "coherent_pair",
            SourceKind::FockPair => "fock_pair",
            SourceKind::SplitClassical => "split_classical",
            SourceKind::IndependentThermal => "independent_thermal",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SourceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown source kind `{s}`")))
    }
}

/// A two-beam photon source, described before any loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceModel {
    /// Multimode twin beam: `modes` independent two-mode squeezed vacua, each
    /// with thermal marginals of mean `mean_per_mode` and identical photon
    /// numbers in both arms.
    TwinBeam { mean_per_mode: f64, modes: u64 },
    /// Independent Poissonian (coherent) beams.
    CoherentPair { probe_mean: f64, reference_mean: f64 },
    /// Product of two Fock states `|n⟩|n⟩`.
    FockPair { n: u64 },
    /// One classical beam of mean `input_mean` and Fano factor `input_fano`
    /// split on a beam splitter sending fraction `tau` to the probe.
    SplitClassical { input_mean: f64, input_fano: f64, tau: f64 },
    /// Two independent multimode thermal beams with identical statistics.
    IndependentThermal { mean_per_mode: f64, modes: u64 },
}

impl SourceModel {
    pub fn twin_beam(mean_per_mode: f64, modes: u64) -> Result<Self> {
        Self::TwinBeam { mean_per_mode, modes }.validated()
    }

    pub fn coherent_pair(probe_mean: f64, reference_mean: f64) -> Result<Self> {
        Self::CoherentPair { probe_mean, reference_mean }.validated()
    }

    pub fn fock_pair(n: u64) -> Self {
        Self::FockPair { n }
    }

    pub fn split_classical(input_mean: f64, input_fano: f64, tau: f64) -> Result<Self> {
        Self::SplitClassical { input_mean, input_fano, tau }.validated()
    }

    pub fn independent_thermal(mean_per_mode: f64, modes: u64) -> Result<Self> {
        Self::IndependentThermal { mean_per_mode, modes }.validated()
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::TwinBeam { mean_per_mode, modes } | Self::IndependentThermal { mean_per_mode, modes } => {
                check_nonneg("mean_per_mode", mean_per_mode)?;
                if modes == 0 {
                    return Err(Error::InvalidArgument("modes must be at least 1".into()));
                }
                Ok(())
            }
            Self::CoherentPair { probe_mean, reference_mean } => {
                check_nonneg("probe_mean", probe_mean)?;
                check_nonneg("reference_mean", reference_mean)
            }
            Self::FockPair { .. } => Ok(()),
            Self::SplitClassical { input_mean, input_fano, tau } => {
                check_nonneg("input_mean", input_mean)?;
                if !(input_fano.is_finite() && input_fano >= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "input_fano = {input_fano}: a classical beam has Fano factor >= 1"
                    )));
                }
                if !(tau > 0.0 && tau < 1.0) {
                    return Err(Error::DegenerateSplit(tau));
                }
                Ok(())
            }
        }
    }

    pub fn kind(&self) -> SourceKind {
        match self {
            Self::TwinBeam { .. } => SourceKind::TwinBeam,
            Self::CoherentPair { .. } => SourceKind::CoherentPair,
            Self::FockPair { .. } => SourceKind::FockPair,
            Self::SplitClassical { .. } => SourceKind::SplitClassical,
            Self::IndependentThermal { .. } => SourceKind::IndependentThermal,
        }
    }

    /// Exact first and second moments of the emitted pair.
    pub fn moments(&self) -> PairMoments {
        match *self {
            Self::TwinBeam { mean_per_mode, modes } => {
                let mean = mean_per_mode * modes as f64;
                let var = mean * (1.0 + mean_per_mode);
                PairMoments { mean_p: mean, mean_r: mean, var_p: var, var_r: var, cov: var }
            }
            Self::IndependentThermal { mean_per_mode, modes } => {
                let mean = mean_per_mode * modes as f64;
                let var = mean * (1.0 + mean_per_mode);
                PairMoments { mean_p: mean, mean_r: mean, var_p: var, var_r: var, cov: 0.0 }
            }
            Self::CoherentPair { probe_mean, reference_mean } => PairMoments {
                mean_p: probe_mean,
                mean_r: reference_mean,
                var_p: probe_mean,
                var_r: reference_mean,
                cov: 0.0,
            },
            Self::FockPair { n } => {
                PairMoments { mean_p: n as f64, mean_r: n as f64, var_p: 0.0, var_r: 0.0, cov: 0.0 }
            }
            Self::SplitClassical { input_mean: m, input_fano: f, tau: t } => PairMoments {
                mean_p: t * m,
                mean_r: (1.0 - t) * m,
                var_p: t * t * f * m + t * (1.0 - t) * m,
                var_r: (1.0 - t) * (1.0 - t) * f * m + t * (1.0 - t) * m,
                cov: t * (1.0 - t) * (f - 1.0) * m,
            },
        }
    }

    /// One emitted pair. The model must be valid.
    pub fn sample(&self, rng: &mut RandomStream) -> CountPair {
        match *self {
            Self::TwinBeam { mean_per_mode, modes } => {
                let n = thermal_unchecked(mean_per_mode, modes, rng);
                CountPair::new(n, n)
            }
            Self::IndependentThermal { mean_per_mode, modes } => CountPair::new(
                thermal_unchecked(mean_per_mode, modes, rng),
                thermal_unchecked(mean_per_mode, modes, rng),
            ),
            Self::CoherentPair { probe_mean, reference_mean } => {
                CountPair::new(poisson_unchecked(probe_mean, rng), poisson_unchecked(reference_mean, rng))
            }
            Self::FockPair { n } => CountPair::new(n, n),
            Self::SplitClassical { input_mean, input_fano, tau } => {
                let input = classical_count(input_mean, input_fano, rng);
                let probe = binomial_unchecked(input, tau, rng);
                CountPair::new(probe, input - probe)
            }
        }
    }

    /// Same source with its intensity multiplied by `factor`, as a slow drift
    /// of the pump would do. Mode structure, Fano factor and splitting ratio
    /// are kept.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            Self::TwinBeam { mean_per_mode, modes } => {
                Self::TwinBeam { mean_per_mode: mean_per_mode * factor, modes }
            }
            Self::IndependentThermal { mean_per_mode, modes } => {
                Self::IndependentThermal { mean_per_mode: mean_per_mode * factor, modes }
            }
            Self::CoherentPair { probe_mean, reference_mean } => Self::CoherentPair {
                probe_mean: probe_mean * factor,
                reference_mean: reference_mean * factor,
            },
            Self::FockPair { n } => Self::FockPair { n: (n as f64 * factor).round() as u64 },
            Self::SplitClassical { input_mean, input_fano, tau } => {
                Self::SplitClassical { input_mean: input_mean * factor, input_fano, tau }
            }
        }
    }

    /// Rescaled so that the emitted probe mean is `target`, keeping the
    /// per-mode occupation (twin beam, thermal), the probe/reference
    /// balance (coherent) and the splitting ratio (classical split).
    pub fn with_probe_mean(&self, target: f64) -> Result<Self> {
        check_nonneg("target probe mean", target)?;
        let out = match *self {
            Self::TwinBeam { mean_per_mode, .. } => {
                if mean_per_mode <= 0.0 {
                    return Err(Error::DegenerateInput(
                        "cannot rescale a source with zero occupation".into(),
                    ));
                }
                Self::TwinBeam { mean_per_mode, modes: ((target / mean_per_mode).round() as u64).max(1) }
            }
            Self::IndependentThermal { mean_per_mode, .. } => {
                if mean_per_mode <= 0.0 {
                    return Err(Error::DegenerateInput(
                        "cannot rescale a source with zero occupation".into(),
                    ));
                }
                Self::IndependentThermal {
                    mean_per_mode,
                    modes: ((target / mean_per_mode).round() as u64).max(1),
                }
            }
            Self::CoherentPair { probe_mean, reference_mean } => {
                let ratio = if probe_mean > 0.0 { reference_mean / probe_mean } else { 1.0 };
                Self::CoherentPair { probe_mean: target, reference_mean: target * ratio }
            }
            Self::FockPair { .. } => Self::FockPair { n: target.round() as u64 },
            Self::SplitClassical { input_fano, tau, .. } => {
                Self::SplitClassical { input_mean: target / tau, input_fano, tau }
            }
        };
        Ok(out)
    }
}

/// Photon number of a classical beam with the given mean and Fano factor
/// (`F = 1` Poisson, `F > 1` negative binomial).
fn classical_count(mean: f64, fano: f64, rng: &mut RandomStream) -> u64 {
    if fano <= 1.0 || mean <= 0.0 {
        poisson_unchecked(mean, rng)
    } else {
        let excess = fano - 1.0;
        gamma_poisson_unchecked(mean / excess, excess, rng)
    }
}

/// Binomial thinning: each of `count` photons survives with probability
/// `survival`.
pub fn thin(count: u64, survival: f64, rng: &mut RandomStream) -> Result<u64> {
    check_unit("survival", survival)?;
    Ok(binomial_unchecked(count, survival, rng))
}

/// Sample loss and probe detection on the probe arm; collection and
/// reference detection on the reference arm.
pub fn apply_channel(pair: CountPair, cfg: &ChannelConfig, rng: &mut RandomStream) -> Result<CountPair> {
    cfg.validate()?;
    Ok(apply_channel_unchecked(pair, cfg, rng))
}

pub(crate) fn apply_channel_unchecked(
    pair: CountPair,
    cfg: &ChannelConfig,
    rng: &mut RandomStream,
) -> CountPair {
    CountPair::new(
        binomial_unchecked(pair.n_p, cfg.probe_survival(), rng),
        binomial_unchecked(pair.n_r, cfg.reference_survival(), rng),
    )
}

/// Split `input_count` photons on a beam splitter of transmission `tau`
/// toward the probe.
pub fn split_classical(input_count: u64, tau: f64, rng: &mut RandomStream) -> Result<CountPair> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::DegenerateSplit(tau));
    }
    let probe = binomial_unchecked(input_count, tau, rng);
    Ok(CountPair::new(probe, input_count - probe))
}

/// Closed-form statistics of the detected pair after `cfg`.
pub fn theoretical_joint_stats(src: &SourceModel, cfg: &ChannelConfig) -> Result<JointStats> {
    src.validate()?;
    cfg.validate()?;
    let m = src.moments().thinned(cfg.probe_survival(), cfg.reference_survival());
    JointStats::from_moments(&m, 0, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn survival_edges() {
        let mut rng = RandomStream::from_seed(1);
        assert_eq!(thin(1234, 1.0, &mut rng).unwrap(), 1234);
        assert_eq!(thin(1234, 0.0, &mut rng).unwrap(), 0);
        assert!(thin(10, 1.01, &mut rng).is_err());
        assert!(thin(10, -0.2, &mut rng).is_err());
    }

    #[test]
    fn ideal_channel_is_identity() {
        let mut rng = RandomStream::from_seed(2);
        let cfg = ChannelConfig::ideal();
        for k in [0, 1, 29, 30, 5000] {
            let pair = CountPair::new(k, k + 3);
            assert_eq!(apply_channel(pair, &cfg, &mut rng).unwrap(), pair);
        }
    }

    #[test]
    fn channel_rejects_bad_config() {
        let mut rng = RandomStream::from_seed(3);
        let cfg = ChannelConfig { eta_p: 1.2, ..ChannelConfig::ideal() };
        assert!(apply_channel(CountPair::new(1, 1), &cfg, &mut rng).is_err());
        assert!(ChannelConfig::new(0.5, 0.5, 0.5, f64::NAN).is_err());
    }

    #[test]
    fn split_conserves_photons() {
        let mut rng = RandomStream::from_seed(4);
        for input in [0, 7, 31, 100_000] {
            let p = split_classical(input, 0.3, &mut rng).unwrap();
            assert_eq!(p.n_p + p.n_r, input);
        }
        assert_eq!(split_classical(10, 0.0, &mut rng), Err(Error::DegenerateSplit(0.0)));
        assert_eq!(split_classical(10, 1.0, &mut rng), Err(Error::DegenerateSplit(1.0)));
    }

    #[test]
    fn constructors_reject_inconsistent_fields() {
        assert!(SourceModel::twin_beam(0.1, 0).is_err());
        assert!(SourceModel::twin_beam(-0.1, 3).is_err());
        assert!(SourceModel::split_classical(100.0, 0.5, 0.5).is_err());
        assert!(matches!(SourceModel::split_classical(100.0, 1.0, 1.0), Err(Error::DegenerateSplit(_))));
        assert!(SourceModel::coherent_pair(-1.0, 2.0).is_err());
    }

    #[test]
    fn unperturbed_twin_beam_theory() {
        let src = SourceModel::twin_beam(0.3, 1000).unwrap();
        let s = theoretical_joint_stats(&src, &ChannelConfig::ideal()).unwrap();
        assert_eq!(s.gamma, 1.0);
        assert!(s.nrf_gamma.abs() < 1e-12);
    }

    #[test]
    fn balanced_coherent_pair_nrf_is_one() {
        let src = SourceModel::coherent_pair(500.0, 500.0).unwrap();
        for alpha in [0.0, 0.3, 0.9] {
            let cfg = ChannelConfig::ideal().with_alpha(alpha);
            let s = theoretical_joint_stats(&src, &cfg).unwrap();
            assert!((s.nrf_gamma - (1.0 + s.gamma) / 2.0).abs() < 1e-12);
        }
        let s = theoretical_joint_stats(&src, &ChannelConfig::ideal()).unwrap();
        assert!((s.nrf_gamma - 1.0).abs() < 1e-12);
    }

    #[test]
    fn balanced_loss_twin_beam_nrf() {
        let src = SourceModel::twin_beam(0.7, 500).unwrap();
        for eta in [0.3, 0.76, 0.95] {
            let cfg = ChannelConfig::balanced(eta, 0.0).unwrap();
            let s = theoretical_joint_stats(&src, &cfg).unwrap();
            assert!((s.nrf() - (1.0 - eta)).abs() < 1e-12);
        }
    }

    #[test]
    fn twin_beam_nrf_model() {
        // σ_γ = (1+γ)/2 − η_R·η_coll for any occupation.
        let src = SourceModel::twin_beam(0.4, 2000).unwrap();
        for (ep, er, ec) in [(0.76, 0.43, 1.0), (0.9, 0.6, 0.8), (0.5, 0.95, 0.7)] {
            let cfg = ChannelConfig::new(ep, er, ec, 0.0).unwrap();
            let s = theoretical_joint_stats(&src, &cfg).unwrap();
            let model = (1.0 + s.gamma) / 2.0 - er * ec;
            assert!((s.nrf_gamma - model).abs() < 1e-12, "{ep} {er} {ec}");
        }
    }

    #[test]
    fn split_relations_hold_for_any_input() {
        for fano in [1.0, 2.0, 7.5] {
            for tau in [0.1, 0.25, 0.5, 0.8] {
                let src = SourceModel::split_classical(1e4, fano, tau).unwrap();
                let s = theoretical_joint_stats(&src, &ChannelConfig::ideal()).unwrap();
                assert!((s.gamma - (1.0 / tau - 1.0)).abs() < 1e-12);
                assert!((s.nrf_gamma - 1.0 / (2.0 * tau)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rescaling_hits_target() {
        let src = SourceModel::twin_beam(2e-9, 1).unwrap();
        let r = src.with_probe_mean(5e5).unwrap();
        assert!((r.moments().mean_p / 5e5 - 1.0).abs() < 1e-6);
        let s = SourceModel::split_classical(10.0, 2.0, 0.25).unwrap().with_probe_mean(100.0).unwrap();
        assert!((s.moments().mean_p - 100.0).abs() < 1e-9);
    }

    #[test]
    fn source_kind_parses() {
        for k in SourceKind::ALL {
            assert_eq!(k.as_str().parse::<SourceKind>().unwrap(), k);
        }
        assert!("laser".parse::<SourceKind>().is_err());
    }
}
