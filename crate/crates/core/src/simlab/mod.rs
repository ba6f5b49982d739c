//! Synthetic camera experiment.
//!
//! A run consists of dark frames (background estimate), a calibration block
//! with the sample removed, and a measurement block with the sample in
//! place. Each frame carries three regions of interest: the probe region,
//! the correlated reference region, and a displaced reference region that is
//! only classically related to the probe.

mod experiment;
mod frame;

pub use experiment::{
    invert_efficiency, run_calibration, run_experiment, run_experiment_with, CalibrationReport, Drift,
    EstimatorSpec, ExperimentPlan, ExperimentReport, ReferenceRegion, TrialEnsemble,
};
pub use frame::{
    estimate_background, generate_dark_frame, generate_frame, integrate_and_correct, source_for_frame,
    CorrectedFrames, Frame, FrameConfig, RawSums,
};
