//! Estimation of optical loss with twin-beam and classical light.
//!
//! * [`photostat`]: photon-number samplers and streaming statistics.
//! * [`channels`]: sources, binomial loss channels, closed-form moments.
//! * [`estimators`]: the four loss estimators, calibration, variance
//!   formulas and reference bounds.
//! * [`simlab`]: a synthetic camera experiment with background, calibration
//!   and repeated runs.

pub mod channels;
pub mod error;
pub mod estimators;
pub mod photostat;
pub mod simlab;

pub use error::{Error, Result};
