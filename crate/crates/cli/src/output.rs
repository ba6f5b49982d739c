//! CSV and JSON emission with atomic replacement of the target files.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use tempfile::NamedTempFile;

/// Version of the column layout of every CSV file written by the tool.
pub const SCHEMA_VERSION: u32 = 1;

pub const BOUNDS_HEADER: &str = "schema_version,alpha,u_snl,u_coh,u_uql,u_bccb";
pub const SWEEP_HEADER: &str =
    "schema_version,alpha_true,eta_p,eta_r,estimator,empirical_mean,empirical_std,\
empirical_std_err,theory_std,u_snl,u_coh,u_uql,u_bccb,exclusions,seed";

#[derive(Debug, Clone, Serialize)]
pub struct BoundsRow {
    pub schema_version: u32,
    pub alpha: f64,
    pub u_snl: f64,
    pub u_coh: f64,
    pub u_uql: f64,
    pub u_bccb: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub schema_version: u32,
    pub alpha_true: f64,
    pub eta_p: f64,
    pub eta_r: f64,
    pub estimator: String,
    pub empirical_mean: f64,
    pub empirical_std: f64,
    pub empirical_std_err: f64,
    pub theory_std: f64,
    pub u_snl: f64,
    pub u_coh: f64,
    pub u_uql: f64,
    pub u_bccb: f64,
    pub exclusions: u64,
    pub seed: u64,
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().context("flushing CSV buffer")
}

/// A file staged next to its destination, moved into place by [`commit`].
pub struct Staged {
    tmp: NamedTempFile,
    dest: PathBuf,
}

pub fn stage(dest: &Path, bytes: &[u8]) -> Result<Staged> {
    let dir = match dest.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.as_file().sync_all())
        .with_context(|| format!("cannot write {}", dest.display()))?;
    Ok(Staged { tmp, dest: dest.to_path_buf() })
}

/// Rename every staged file over its destination.
pub fn commit(files: Vec<Staged>) -> Result<()> {
    for f in files {
        f.tmp.persist(&f.dest).with_context(|| format!("cannot write {}", f.dest.display()))?;
    }
    Ok(())
}

pub fn write_atomic(dest: &Path, bytes: &[u8]) -> Result<()> {
    commit(vec![stage(dest, bytes)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_match_row_layout() {
        let b = BoundsRow {
            schema_version: SCHEMA_VERSION,
            alpha: 0.5,
            u_snl: 0.1,
            u_coh: 0.07,
            u_uql: 0.05,
            u_bccb: 0.12,
        };
        let text = String::from_utf8(to_csv(&[b]).unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), BOUNDS_HEADER);
        let s = SweepRow {
            schema_version: SCHEMA_VERSION,
            alpha_true: 0.02,
            eta_p: 0.76,
            eta_r: 0.76,
            estimator: "ratio".into(),
            empirical_mean: 0.0,
            empirical_std: 0.0,
            empirical_std_err: 0.0,
            theory_std: 0.0,
            u_snl: 0.0,
            u_coh: 0.0,
            u_uql: 0.0,
            u_bccb: 0.0,
            exclusions: 0,
            seed: 3,
        };
        let text = String::from_utf8(to_csv(&[s]).unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), SWEEP_HEADER);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn unwritable_destination_is_reported_with_path() {
        let err = write_atomic(Path::new("/nonexistent-dir/x.csv"), b"x").unwrap_err();
        assert!(format!("{err:#}").contains("/nonexistent-dir"));
    }
}
