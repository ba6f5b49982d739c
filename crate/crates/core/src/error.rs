use thiserror::Error;

/// Errors raised by samplers, reducers, estimators and the simulation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("degenerate split ratio {0}: must lie strictly inside (0, 1)")]
    DegenerateSplit(f64),

    #[error("reference count is zero; ratio estimator undefined for this trial")]
    DegenerateDenominator,

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("inconsistent calibration: inverted efficiency {0} lies outside [0, 1]")]
    InconsistentCalibration(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} = {value} must lie in [0, 1]")))
    }
}

pub(crate) fn check_nonneg(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} = {value} must be finite and non-negative")))
    }
}
