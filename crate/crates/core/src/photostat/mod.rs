//! Photon-number samplers and streaming second-moment reducers.
//!
//! Samplers are pure functions of their parameters and a [`RandomStream`];
//! the same seed always yields the same sequence. Reducers accumulate means,
//! unbiased variances and the covariance of count pairs in a single pass and
//! can be merged, so disjoint chunks may be reduced in parallel.

pub(crate) mod moments;
pub(crate) mod rng;
pub(crate) mod samplers;

pub use moments::{
    batch_standard_error, reduce_stats, BeamStats, CountPair, JointAccumulator, JointStats, PairMoments,
    RunningStats,
};
pub use rng::RandomStream;
pub use samplers::{
    sample_binomial, sample_fock_pair, sample_gamma_poisson, sample_geometric, sample_poisson,
    sample_thermal, sample_twb_pair, BINOMIAL_INVERSION_LIMIT, THERMAL_MODE_LOOP_LIMIT,
};

#[doc(hidden)]
pub use samplers::{binomial_by_inversion, binomial_large_count, thermal_by_mixture, thermal_by_modes};
