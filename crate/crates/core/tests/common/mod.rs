#![allow(dead_code)]

use rayon::prelude::*;
use twinloss::channels::{apply_channel, theoretical_joint_stats, ChannelConfig, SourceModel};
use twinloss::estimators::{calibrate, estimate_block, CalibrationRecord, EstimatorKind};
use twinloss::photostat::{CountPair, JointStats, RandomStream, RunningStats};

const CHUNK: usize = 8192;

/// `trials` detected pairs of `src` through `cfg`, sampled in parallel on
/// independent streams; the result depends only on `seed`.
pub fn draw_pairs(src: &SourceModel, cfg: &ChannelConfig, trials: usize, seed: u64) -> Vec<CountPair> {
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = RandomStream::derive(seed, c as u64);
            let len = CHUNK.min(trials - c * CHUNK);
            (0..len).map(|_| apply_channel(src.sample(&mut rng), cfg, &mut rng).unwrap()).collect::<Vec<_>>()
        })
        .collect()
}

/// Sample-free calibration from `trials` pairs plus the closed-form
/// statistics of the same setup.
pub struct Bench {
    pub cal: CalibrationRecord,
    pub theory: JointStats,
}

impl Bench {
    pub fn new(src: &SourceModel, cfg: &ChannelConfig, trials: usize, seed: u64) -> Self {
        let calib_cfg = cfg.with_alpha(0.0);
        let pairs = draw_pairs(src, &calib_cfg, trials, seed);
        Self { cal: calibrate(&pairs).unwrap(), theory: theoretical_joint_stats(src, &calib_cfg).unwrap() }
    }

    pub fn mean_np(&self) -> f64 {
        self.theory.probe.mean
    }
}

pub fn block_stats(kind: EstimatorKind, pairs: &[CountPair], cal: &CalibrationRecord) -> RunningStats {
    let block = estimate_block(kind, pairs, cal);
    assert_eq!(block.exclusions, 0, "{kind} excluded trials");
    block.stats()
}

pub fn rel_dev(measured: f64, expected: f64) -> f64 {
    measured / expected - 1.0
}

/// Fano factor of a slice of counts.
pub fn fano(counts: &[u64]) -> f64 {
    let s: RunningStats = counts.iter().map(|&c| c as f64).collect();
    s.variance() / s.mean()
}
