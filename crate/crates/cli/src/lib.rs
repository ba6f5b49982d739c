//! Command-line front end of `twinloss`: bounds tables, Monte Carlo sweeps
//! and calibration reports.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{RunConfig, ValidationReport};

/// Environment variable selecting the worker thread count. Results do not
/// depend on it.
pub const THREADS_ENV: &str = "TWINLOSS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "twinloss", version, about = "Loss estimation with twin-beam and classical light")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Run configuration (TOML, or a JSON sidecar from a previous sweep).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; bounds and calibrate print to stdout without it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated sample losses.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    pub alpha: Option<Vec<f64>>,
    /// Comma-separated reference detection efficiencies.
    #[arg(long = "eta-r", global = true, value_delimiter = ',', num_args = 1..)]
    pub eta_r: Option<Vec<f64>>,
    /// Comma-separated estimators: ratio, optimized, differential,
    /// single_beam, bccb.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    pub estimators: Option<Vec<String>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Table of the reference bounds versus α.
    Bounds {
        /// Detected probe photons; defaults to the configured photons per
        /// region.
        #[arg(long = "mean-np")]
        mean_np: Option<f64>,
    },
    /// Run the synthetic experiment over the α × η_R grid.
    Sweep,
    /// Sample-free acquisition: γ, σ_γ, Fano factors, k and η_R.
    Calibrate,
}

/// Failure classes with distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    Invalid(ValidationReport),
    Failed(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Invalid(_) => 2,
            Self::Failed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Invalid(r) => write!(f, "{r}"),
            Self::Failed(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        Self::Failed(e)
    }
}

/// Configuration file merged with the command-line overrides, validated.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let (mut cfg, origin) = match &cli.config {
        Some(path) => (RunConfig::from_file(path)?.map_err(CliError::Invalid)?, path.display().to_string()),
        None => (RunConfig::default(), "defaults".to_string()),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(a) = &cli.alpha {
        cfg.alpha = a.clone();
    }
    if let Some(e) = &cli.eta_r {
        cfg.eta_r = e.clone();
    }
    if let Some(e) = &cli.estimators {
        cfg.estimators = e.iter().map(|s| s.trim().to_string()).collect();
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    cfg.validate(&format!("{origin} with command-line overrides")).map_err(CliError::Invalid)?;
    Ok(cfg)
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::Invalid(ValidationReport {
                source: "environment".into(),
                violations: vec![format!("{THREADS_ENV} = `{v}` must be a positive integer")],
            })
        })?;
        builder = builder.num_threads(n);
    }
    builder.build().context("cannot start worker threads").map_err(CliError::Failed)
}

fn emit(out: Option<&PathBuf>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => output::write_atomic(p, bytes),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes).context("writing to stdout")
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let pool = thread_pool()?;
    match cli.command {
        Command::Bounds { mean_np } => {
            // The bounds table has its own grid unless α is given explicitly.
            let cfg = resolve_config(&cli)?;
            let alphas = match (&cli.alpha, &cli.config) {
                (None, None) => commands::default_bounds_grid(),
                _ => cfg.alpha.clone(),
            };
            let rows = commands::bounds(&alphas, mean_np.unwrap_or(cfg.mean_photons_per_region))?;
            emit(cli.out.as_ref(), &output::to_csv(&rows)?)?;
        }
        Command::Sweep => {
            let cfg = resolve_config(&cli)?;
            let rows = pool.install(|| commands::sweep(&cfg))?;
            let csv = output::to_csv(&rows)?;
            let mut sidecar = serde_json::to_vec_pretty(&cfg).context("serializing configuration")?;
            sidecar.push(b'\n');
            let staged = vec![
                output::stage(&cfg.out, &csv)?,
                output::stage(&cfg.out.with_extension("json"), &sidecar)?,
            ];
            output::commit(staged)?;
            eprintln!(
                "wrote {} rows to {} (configuration in {})",
                rows.len(),
                cfg.out.display(),
                cfg.out.with_extension("json").display()
            );
        }
        Command::Calibrate => {
            let cfg = resolve_config(&cli)?;
            let report = pool.install(|| commands::calibrate(&cfg))?;
            let mut json = serde_json::to_vec_pretty(&report).context("serializing report")?;
            json.push(b'\n');
            emit(cli.out.as_ref(), &json)?;
        }
    }
    Ok(())
}
