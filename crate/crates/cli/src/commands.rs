use std::collections::BTreeMap;

use anyhow::{Context, Result};
use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;
use twinloss::estimators::{bound, BoundKind, CalibrationRecord};
use twinloss::photostat::{JointAccumulator, RandomStream, RunningStats};
use twinloss::simlab::{invert_efficiency, run_calibration, run_experiment_with};

use crate::config::RunConfig;
use crate::output::{BoundsRow, SweepRow, SCHEMA_VERSION};

/// Default grid of the bounds table: α from 0 to 1 in steps of 0.05.
pub fn default_bounds_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

pub fn bounds(alphas: &[f64], mean_np: f64) -> Result<Vec<BoundsRow>> {
    alphas
        .iter()
        .map(|&alpha| {
            let b =
                |k| bound(k, alpha, mean_np).with_context(|| format!("alpha = {alpha}, mean_np = {mean_np}"));
            Ok(BoundsRow {
                schema_version: SCHEMA_VERSION,
                alpha,
                u_snl: b(BoundKind::Snl)?,
                u_coh: b(BoundKind::Coherent)?,
                u_uql: b(BoundKind::Uql)?,
                u_bccb: b(BoundKind::BalancedCcb)?,
            })
        })
        .collect()
}

/// `(alpha, eta_r)` sweep points, η_R outermost.
pub fn sweep_points(cfg: &RunConfig) -> Vec<(f64, f64)> {
    cfg.eta_r.iter().flat_map(|&e| cfg.alpha.iter().map(move |&a| (a, e))).collect()
}

/// Seed of sweep point `index`, derived from the master seed so that each
/// point can be re-run on its own.
pub fn point_seed(master: u64, index: usize) -> u64 {
    RandomStream::derive(master, 1 << 32 | index as u64).next_u64()
}

pub fn sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    let points = sweep_points(cfg);
    let reports = points
        .par_iter()
        .enumerate()
        .map(|(i, &(alpha, eta_r))| {
            let seed = point_seed(cfg.seed, i);
            let plan = cfg.plan(alpha, eta_r)?;
            let report = run_experiment_with(&plan, seed)
                .with_context(|| format!("sweep point alpha = {alpha}, eta_r = {eta_r}"))?;
            Ok((alpha, eta_r, seed, report))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (alpha, eta_r, seed, report) in reports {
        for e in &report.ensembles {
            rows.push(SweepRow {
                schema_version: SCHEMA_VERSION,
                alpha_true: alpha,
                eta_p: cfg.eta_p,
                eta_r,
                estimator: e.label(),
                empirical_mean: e.empirical_mean,
                empirical_std: e.empirical_std,
                empirical_std_err: e.empirical_std_err,
                theory_std: e.theory_std,
                u_snl: e.bounds[&BoundKind::Snl],
                u_coh: e.bounds[&BoundKind::Coherent],
                u_uql: e.bounds[&BoundKind::Uql],
                u_bccb: e.bounds[&BoundKind::BalancedCcb],
                exclusions: e.exclusions,
                seed,
            });
        }
    }
    Ok(rows)
}

/// A pooled value and its bootstrap standard error over runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationPoint {
    pub eta_p: f64,
    pub eta_r: f64,
    pub eta_coll: f64,
    pub runs: usize,
    pub frames_per_run: usize,
    pub seed: u64,
    pub gamma: Estimate,
    pub sigma_gamma: Estimate,
    pub fano_p: Estimate,
    pub fano_r: Estimate,
    pub k_opt: Estimate,
    /// Reference efficiency from `σ_γ = (1+γ)/2 − η_R·η_coll`; absent when
    /// the data are inconsistent with a twin beam.
    pub eta_r_inferred: Option<Estimate>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationOutput {
    pub schema_version: u32,
    pub source: String,
    pub bootstrap_resamples: usize,
    pub points: Vec<CalibrationPoint>,
}

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

fn quantities(cal: &CalibrationRecord, eta_coll: f64) -> [f64; 6] {
    [
        cal.gamma,
        cal.sigma_gamma,
        cal.fano_p,
        cal.fano_r,
        cal.k_opt,
        ((1.0 + cal.gamma) / 2.0 - cal.sigma_gamma) / eta_coll,
    ]
}

pub fn calibrate(cfg: &RunConfig) -> Result<CalibrationOutput> {
    let src = cfg.source_model()?;
    let points = cfg
        .eta_r
        .iter()
        .enumerate()
        .map(|(i, &eta_r)| {
            let seed = point_seed(cfg.seed, i);
            let channel = cfg.channel(0.0, eta_r)?;
            let report = run_calibration(&src, &channel, &cfg.frame(), seed)
                .with_context(|| format!("calibration at eta_r = {eta_r}"))?;
            let pooled = quantities(&report.pooled, cfg.eta_coll);

            let accs: Vec<JointAccumulator> =
                report.per_run.iter().map(|c| JointAccumulator::from(&c.stats)).collect();
            let mut spread = [RunningStats::new(); 6];
            let mut rng = RandomStream::derive(seed, 0xb007);
            let n = accs.len();
            for _ in 0..BOOTSTRAP_RESAMPLES {
                let mut acc = JointAccumulator::new();
                for _ in 0..n {
                    let pick = ((rng.uniform_open0() * n as f64).ceil() as usize).clamp(1, n) - 1;
                    acc.merge(&accs[pick]);
                }
                let Ok(cal) = acc.finish(None).and_then(CalibrationRecord::from_stats) else {
                    continue;
                };
                for (s, q) in spread.iter_mut().zip(quantities(&cal, cfg.eta_coll)) {
                    s.push(q);
                }
            }
            let est = |j: usize| Estimate { value: pooled[j], std_err: spread[j].std_dev() };
            let mut notes = Vec::new();
            let eta_r_inferred = match invert_efficiency(&report.pooled, cfg.eta_coll) {
                Ok(_) => Some(est(5)),
                Err(e) => {
                    notes.push(format!("efficiency inversion: {e}"));
                    None
                }
            };
            if src.kind() != twinloss::channels::SourceKind::TwinBeam && eta_r_inferred.is_some() {
                notes.push("efficiency inversion assumes a twin-beam source".into());
            }
            Ok(CalibrationPoint {
                eta_p: cfg.eta_p,
                eta_r,
                eta_coll: cfg.eta_coll,
                runs: cfg.runs,
                frames_per_run: cfg.frames_per_run,
                seed,
                gamma: est(0),
                sigma_gamma: est(1),
                fano_p: est(2),
                fano_r: est(3),
                k_opt: est(4),
                eta_r_inferred,
                notes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CalibrationOutput {
        schema_version: SCHEMA_VERSION,
        source: cfg.source.clone(),
        bootstrap_resamples: BOOTSTRAP_RESAMPLES,
        points,
    })
}

/// Ratio of empirical standard deviations between two estimators at each
/// `(alpha, eta_r)` point of a sweep.
pub fn std_ratio(rows: &[SweepRow], numerator: &str, denominator: &str) -> BTreeMap<(u64, u64), f64> {
    let key = |r: &SweepRow| (r.alpha_true.to_bits(), r.eta_r.to_bits());
    let den: BTreeMap<_, _> =
        rows.iter().filter(|r| r.estimator == denominator).map(|r| (key(r), r.empirical_std)).collect();
    rows.iter()
        .filter(|r| r.estimator == numerator)
        .filter_map(|r| den.get(&key(r)).map(|d| (key(r), r.empirical_std / d)))
        .collect()
}
