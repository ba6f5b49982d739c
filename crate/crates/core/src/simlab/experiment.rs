use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::frame::{
    estimate_background, frame_unchecked, generate_dark_frame, integrate_and_correct, source_for_frame,
    CorrectedFrames, Frame, FrameConfig,
};
use crate::channels::{ChannelConfig, SourceModel};
use crate::error::{Error, Result};
use crate::estimators::{
    bound, estimate_block, variance_from_stats, BoundKind, CalibrationRecord, EstimatorKind,
};
use crate::photostat::{CountPair, JointAccumulator, RandomStream, RunningStats};

/// Which reference region feeds an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceRegion {
    /// The region holding the twins of the probe photons.
    Correlated,
    /// A region only classically related to the probe.
    Displaced,
}

/// An estimator together with the reference region it reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub reference: ReferenceRegion,
}

impl EstimatorSpec {
    pub const fn correlated(kind: EstimatorKind) -> Self {
        Self { kind, reference: ReferenceRegion::Correlated }
    }

    /// Ratio estimator on the displaced region: the classical two-beam
    /// benchmark.
    pub const fn balanced_ccb() -> Self {
        Self { kind: EstimatorKind::Ratio, reference: ReferenceRegion::Displaced }
    }

    /// The four estimators on the correlated region plus the classical
    /// two-beam benchmark.
    pub fn standard_set() -> Vec<Self> {
        let mut v: Vec<Self> = EstimatorKind::ALL.into_iter().map(Self::correlated).collect();
        v.push(Self::balanced_ccb());
        v
    }

    pub fn label(&self) -> String {
        match (self.kind, self.reference) {
            (EstimatorKind::Ratio, ReferenceRegion::Displaced) => "bccb".to_string(),
            (k, ReferenceRegion::Correlated) => k.as_str().to_string(),
            (k, ReferenceRegion::Displaced) => format!("{}_displaced", k.as_str()),
        }
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for EstimatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "bccb" {
            return Ok(Self::balanced_ccb());
        }
        match s.strip_suffix("_displaced") {
            Some(base) => Ok(Self { kind: base.parse()?, reference: ReferenceRegion::Displaced }),
            None => Ok(Self::correlated(s.parse()?)),
        }
    }
}

/// Slow sinusoidal drift of the source intensity, common to both arms.
///
/// The factor at frame `t` of a run (calibration frames first, then
/// measurement frames) is `1 + amplitude · sin(2π t / period_frames)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub amplitude: f64,
    pub period_frames: f64,
}

impl Drift {
    /// A quarter period over one run: the source brightens monotonically
    /// from calibration to measurement.
    pub fn rising_over_run(amplitude: f64, frames_per_run: usize) -> Self {
        Self { amplitude, period_frames: 8.0 * frames_per_run as f64 }
    }

    pub fn factor(&self, t: usize) -> f64 {
        1.0 + self.amplitude * (2.0 * PI * t as f64 / self.period_frames).sin()
    }
}

/// Everything needed to run a synthetic experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub source: SourceModel,
    pub channel: ChannelConfig,
    pub frame: FrameConfig,
    pub estimators: Vec<EstimatorSpec>,
    pub drift: Option<Drift>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.channel.validate()?;
        self.frame.validate()?;
        if let Some(d) = &self.drift {
            if !(d.amplitude.is_finite() && d.amplitude.abs() < 1.0 && d.period_frames > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "drift amplitude {} must be in (-1, 1) with a positive period",
                    d.amplitude
                )));
            }
        }
        Ok(())
    }
}

/// Results of one estimator across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEnsemble {
    pub estimator: EstimatorKind,
    pub reference: ReferenceRegion,
    pub alpha_true: f64,
    /// Run estimates of α: the mean over the frames of each run.
    pub estimates: Vec<f64>,
    /// Per-run frame-to-frame standard deviation, the uncertainty Δα of a
    /// single-frame estimate.
    pub run_stds: Vec<f64>,
    /// Mean of `estimates`.
    pub empirical_mean: f64,
    /// Standard error of `empirical_mean` across runs.
    pub mean_std_err: f64,
    /// Mean of `run_stds`: the reported Δα.
    pub empirical_std: f64,
    /// Error bar of Δα from run-to-run scatter, `std(run_stds)/√runs`.
    pub empirical_std_err: f64,
    /// Predicted single-frame standard deviation from the pooled
    /// calibration statistics.
    pub theory_std: f64,
    pub bounds: BTreeMap<BoundKind, f64>,
    pub exclusions: u64,
}

impl TrialEnsemble {
    pub fn label(&self) -> String {
        EstimatorSpec { kind: self.estimator, reference: self.reference }.label()
    }

    fn assemble(
        spec: EstimatorSpec,
        alpha_true: f64,
        runs: &[RunOutcome],
        slot: usize,
        calib: &CalibrationRecord,
    ) -> Result<Self> {
        let estimates: Vec<f64> = runs.iter().map(|r| r.blocks[slot].mean).collect();
        let run_stds: Vec<f64> = runs.iter().map(|r| r.blocks[slot].std).collect();
        let exclusions = runs.iter().map(|r| r.blocks[slot].exclusions).sum();
        let means: RunningStats = estimates.iter().copied().collect();
        let stds: RunningStats = run_stds.iter().copied().collect();
        let theory_std = variance_from_stats(spec.kind, &calib.stats, alpha_true)?.sqrt();
        let bounds = BoundKind::ALL
            .into_iter()
            .map(|b| Ok((b, bound(b, alpha_true, calib.mean_np)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            estimator: spec.kind,
            reference: spec.reference,
            alpha_true,
            empirical_mean: means.mean(),
            mean_std_err: means.std_err(),
            empirical_std: stds.mean(),
            empirical_std_err: stds.std_err(),
            estimates,
            run_stds,
            theory_std,
            bounds,
            exclusions,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub alpha_true: f64,
    pub ensembles: Vec<TrialEnsemble>,
    /// Calibration of each run, correlated reference.
    pub calibrations: Vec<CalibrationRecord>,
    /// Calibration pooled over all runs, correlated reference.
    pub pooled: CalibrationRecord,
    /// Calibration pooled over all runs, displaced reference.
    pub pooled_displaced: CalibrationRecord,
}

impl ExperimentReport {
    pub fn ensemble(&self, spec: EstimatorSpec) -> Option<&TrialEnsemble> {
        self.ensembles.iter().find(|e| e.estimator == spec.kind && e.reference == spec.reference)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub per_run: Vec<CalibrationRecord>,
    pub pooled: CalibrationRecord,
}

#[derive(Debug, Clone, Copy)]
struct BlockSummary {
    mean: f64,
    std: f64,
    exclusions: u64,
}

struct RunOutcome {
    calibration: CalibrationRecord,
    acc: JointAccumulator,
    acc_displaced: JointAccumulator,
    blocks: Vec<BlockSummary>,
}

fn run_seed_stream(master_seed: u64, run: usize) -> RandomStream {
    RandomStream::derive(master_seed, run as u64)
}

fn acquire(
    src: &SourceModel,
    cfg: &ChannelConfig,
    fcfg: &FrameConfig,
    drift: Option<&Drift>,
    t0: usize,
    rng: &mut RandomStream,
) -> Vec<Frame> {
    (0..fcfg.frames_per_run)
        .map(|i| match drift {
            Some(d) => frame_unchecked(&src.scaled(d.factor(t0 + i)), cfg, fcfg, rng),
            None => frame_unchecked(src, cfg, fcfg, rng),
        })
        .collect()
}

fn accumulate(pairs: &[CountPair]) -> JointAccumulator {
    let mut acc = JointAccumulator::new();
    acc.extend(pairs.iter().copied());
    acc
}

fn single_run(
    plan: &ExperimentPlan,
    src: &SourceModel,
    master_seed: u64,
    run: usize,
    measure: bool,
) -> Result<RunOutcome> {
    let fcfg = &plan.frame;
    let mut rng = run_seed_stream(master_seed, run);

    let dark: Vec<Frame> = (0..fcfg.frames_per_run).map(|_| generate_dark_frame(fcfg, &mut rng)).collect();
    let background = estimate_background(&dark);

    let no_sample = plan.channel.with_alpha(0.0);
    let cal_frames = acquire(src, &no_sample, fcfg, plan.drift.as_ref(), 0, &mut rng);
    let cal: CorrectedFrames = integrate_and_correct(&cal_frames, background)?;
    let acc = accumulate(&cal.pairs);
    let acc_displaced = accumulate(&cal.displaced);
    let calibration = CalibrationRecord::from_stats(acc.finish(None)?)?;
    let calibration_displaced = CalibrationRecord::from_stats(acc_displaced.finish(None)?)?;

    let mut blocks = Vec::new();
    if measure {
        let meas_frames =
            acquire(src, &plan.channel, fcfg, plan.drift.as_ref(), fcfg.frames_per_run, &mut rng);
        let meas = integrate_and_correct(&meas_frames, background)?;
        for spec in &plan.estimators {
            let (pairs, cal) = match spec.reference {
                ReferenceRegion::Correlated => (&meas.pairs, &calibration),
                ReferenceRegion::Displaced => (&meas.displaced, &calibration_displaced),
            };
            let block = estimate_block(spec.kind, pairs, cal);
            let stats = block.stats();
            blocks.push(BlockSummary {
                mean: stats.mean(),
                std: stats.std_dev(),
                exclusions: block.exclusions,
            });
        }
    }
    Ok(RunOutcome { calibration, acc, acc_displaced, blocks })
}

fn all_runs(plan: &ExperimentPlan, master_seed: u64, measure: bool) -> Result<Vec<RunOutcome>> {
    plan.validate()?;
    let src = source_for_frame(&plan.source, &plan.channel, &plan.frame)?;
    let runs = plan.frame.runs;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..runs).into_par_iter().map(|r| single_run(plan, &src, master_seed, r, measure)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..runs).map(|r| single_run(plan, &src, master_seed, r, measure)).collect()
    }
}

fn pooled(outcomes: &[RunOutcome], displaced: bool) -> Result<CalibrationRecord> {
    let mut acc = JointAccumulator::new();
    for o in outcomes {
        acc.merge(if displaced { &o.acc_displaced } else { &o.acc });
    }
    CalibrationRecord::from_stats(acc.finish(None)?)
}

/// Run calibration and measurement for every run of `plan` and summarize
/// each estimator. Runs use independent streams derived from `master_seed`
/// and are reduced in run order, so the output does not depend on thread
/// scheduling.
pub fn run_experiment_with(plan: &ExperimentPlan, master_seed: u64) -> Result<ExperimentReport> {
    let outcomes = all_runs(plan, master_seed, true)?;
    let pooled_corr = pooled(&outcomes, false)?;
    let pooled_disp = pooled(&outcomes, true)?;
    let alpha = plan.channel.alpha;
    let ensembles = plan
        .estimators
        .iter()
        .enumerate()
        .map(|(slot, spec)| {
            let calib = match spec.reference {
                ReferenceRegion::Correlated => &pooled_corr,
                ReferenceRegion::Displaced => &pooled_disp,
            };
            TrialEnsemble::assemble(*spec, alpha, &outcomes, slot, calib)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport {
        alpha_true: alpha,
        ensembles,
        calibrations: outcomes.iter().map(|o| o.calibration).collect(),
        pooled: pooled_corr,
        pooled_displaced: pooled_disp,
    })
}

/// [`run_experiment_with`] without drift.
pub fn run_experiment(
    src: &SourceModel,
    cfg: &ChannelConfig,
    fcfg: &FrameConfig,
    estimators: &[EstimatorSpec],
    master_seed: u64,
) -> Result<ExperimentReport> {
    let plan = ExperimentPlan {
        source: *src,
        channel: *cfg,
        frame: *fcfg,
        estimators: estimators.to_vec(),
        drift: None,
    };
    run_experiment_with(&plan, master_seed)
}

/// Sample-free acquisition only.
pub fn run_calibration(
    src: &SourceModel,
    cfg: &ChannelConfig,
    fcfg: &FrameConfig,
    master_seed: u64,
) -> Result<CalibrationReport> {
    let plan = ExperimentPlan {
        source: *src,
        channel: cfg.with_alpha(0.0),
        frame: *fcfg,
        estimators: Vec::new(),
        drift: None,
    };
    let outcomes = all_runs(&plan, master_seed, false)?;
    Ok(CalibrationReport {
        per_run: outcomes.iter().map(|o| o.calibration).collect(),
        pooled: pooled(&outcomes, false)?,
    })
}

/// Reference detection efficiency from twin-beam calibration data, by
/// inverting `σ_γ = (1+γ)/2 − η_R·η_coll`.
///
/// Meaningful only for twin-beam sources; classical inputs produce values
/// outside `[0, 1]` or meaningless ones.
pub fn invert_efficiency(cal: &CalibrationRecord, eta_coll: f64) -> Result<f64> {
    if !(eta_coll > 0.0 && eta_coll <= 1.0) {
        return Err(Error::InvalidArgument(format!("eta_coll = {eta_coll} must lie in (0, 1]")));
    }
    let eta_r = ((1.0 + cal.gamma) / 2.0 - cal.sigma_gamma) / eta_coll;
    if (0.0..=1.0).contains(&eta_r) {
        Ok(eta_r)
    } else {
        Err(Error::InconsistentCalibration(eta_r))
    }
}
