use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SWEEP_HEADER: &str = "schema_version,alpha_true,eta_p,eta_r,estimator,empirical_mean,empirical_std,\
empirical_std_err,theory_std,u_snl,u_coh,u_uql,u_bccb,exclusions,seed";

fn twinloss(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twinloss")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Small, fast acquisition for determinism checks.
const SMALL: &str = "roi_pixels = 4\nmean_photons_per_region = 5000.0\nframes_per_run = 50\nruns = 4\n";

#[derive(Debug)]
struct Row {
    alpha: f64,
    eta_r: f64,
    estimator: String,
    std: f64,
    theory: f64,
}

fn rows(csv_text: &str) -> Vec<Row> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let h = r.headers().unwrap().clone();
    let col = |name: &str| h.iter().position(|c| c == name).unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            Row {
                alpha: rec[col("alpha_true")].parse().unwrap(),
                eta_r: rec[col("eta_r")].parse().unwrap(),
                estimator: rec[col("estimator")].to_string(),
                std: rec[col("empirical_std")].parse().unwrap(),
                theory: rec[col("theory_std")].parse().unwrap(),
            }
        })
        .collect()
}

fn std_of(rows: &[Row], estimator: &str, alpha: f64, eta_r: f64) -> (f64, f64) {
    let r = rows.iter().find(|r| r.estimator == estimator && r.alpha == alpha && r.eta_r == eta_r).unwrap();
    (r.std, r.theory)
}

#[test]
fn bounds_table() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(twinloss(dir.path(), &["bounds", "--alpha", "0,0.5", "--mean-np", "100"]));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "schema_version,alpha,u_snl,u_coh,u_uql,u_bccb");
    let row0: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    let row1: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row0[2], row0[3]);
    assert!((row1[4] - 0.05).abs() < 1e-15);

    let text = ok(twinloss(dir.path(), &["bounds"]));
    let table: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(table.len(), 21);
    assert!(table.iter().all(|r| r[4] <= r[3]));

    ok(twinloss(dir.path(), &["bounds", "--out", "b.csv"]));
    assert_eq!(std::fs::read_to_string(dir.path().join("b.csv")).unwrap(), text);
}

#[test]
fn sweep_is_deterministic_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "small.toml", SMALL);
    let args = ["sweep", "--config", "small.toml", "--alpha", "0.05,0.3", "--seed", "11"];
    ok(twinloss(dir.path(), &[&args[..], &["--out", "a.csv"]].concat()));
    ok(twinloss(dir.path(), &[&args[..], &["--out", "b.csv"]].concat()));
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    let text = String::from_utf8(a.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), SWEEP_HEADER);
    assert_eq!(text.lines().count(), 1 + 2 * 5);

    // The sidecar alone reproduces the file.
    ok(twinloss(dir.path(), &["sweep", "--config", "a.json", "--out", "c.csv"]));
    assert_eq!(a, std::fs::read(dir.path().join("c.csv")).unwrap());

    // Thread count does not change results.
    let out = Command::new(env!("CARGO_BIN_EXE_twinloss"))
        .current_dir(dir.path())
        .env("TWINLOSS_THREADS", "1")
        .args([&args[..], &["--out", "d.csv"]].concat())
        .output()
        .unwrap();
    ok(out);
    assert_eq!(a, std::fs::read(dir.path().join("d.csv")).unwrap());

    ok(twinloss(
        dir.path(),
        &["sweep", "--config", "small.toml", "--alpha", "0.05,0.3", "--seed", "12", "--out", "e.csv"],
    ));
    assert_ne!(a, std::fs::read(dir.path().join("e.csv")).unwrap());
}

#[test]
fn default_sweep_shows_the_enhancement() {
    let dir = tempfile::tempdir().unwrap();
    ok(twinloss(
        dir.path(),
        &["sweep", "--alpha", "0.02", "--estimators", "optimized,single_beam,bccb", "--out", "s.csv"],
    ));
    let r = rows(&std::fs::read_to_string(dir.path().join("s.csv")).unwrap());
    let (opt, _) = std_of(&r, "optimized", 0.02, 0.76);
    let (single, _) = std_of(&r, "single_beam", 0.02, 0.76);
    let (bccb, _) = std_of(&r, "bccb", 0.02, 0.76);
    assert!((1.36..=1.66).contains(&(single / opt)), "{}", single / opt);
    assert!((1.8..=2.2).contains(&(bccb / opt)), "{}", bccb / opt);
}

#[test]
fn eta_r_sweep_crosses_single_beam_near_half() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "c.toml",
        "roi_pixels = 4\nmean_photons_per_region = 20000.0\ndark_mean = 0.0\nread_noise_sigma = 0.0\nruns = 10\n",
    );
    ok(twinloss(
        dir.path(),
        &[
            "sweep",
            "--config",
            "c.toml",
            "--alpha",
            "0.1",
            "--eta-r",
            "0.3,0.4,0.6,0.7",
            "--estimators",
            "ratio,optimized,single_beam",
            "--out",
            "c.csv",
        ],
    ));
    let r = rows(&std::fs::read_to_string(dir.path().join("c.csv")).unwrap());
    for eta_r in [0.3, 0.4, 0.6, 0.7] {
        let (ratio, ratio_t) = std_of(&r, "ratio", 0.1, eta_r);
        let (single, single_t) = std_of(&r, "single_beam", 0.1, eta_r);
        let (opt, _) = std_of(&r, "optimized", 0.1, eta_r);
        assert_eq!(ratio > single, eta_r < 0.5, "eta_r={eta_r}: {ratio} vs {single}");
        assert_eq!(ratio_t > single_t, eta_r < 0.5);
        assert!(opt < single);
    }
}

#[test]
fn calibrate_reports() {
    let dir = tempfile::tempdir().unwrap();
    let v: Value = serde_json::from_str(&ok(twinloss(dir.path(), &["calibrate"]))).unwrap();
    let p = &v["points"][0];
    assert!((p["sigma_gamma"]["value"].as_f64().unwrap() - 0.24).abs() < 0.01);
    assert!((p["eta_r_inferred"]["value"].as_f64().unwrap() - 0.76).abs() < 0.01);
    assert!(p["sigma_gamma"]["std_err"].as_f64().unwrap() > 0.0);

    write(
        dir.path(),
        "lossless.toml",
        "eta_p = 1.0\neta_r = [1.0]\ndark_mean = 0.0\nread_noise_sigma = 0.0\nroi_pixels = 4\n",
    );
    let v: Value =
        serde_json::from_str(&ok(twinloss(dir.path(), &["calibrate", "--config", "lossless.toml"]))).unwrap();
    assert_eq!(v["points"][0]["sigma_gamma"]["value"].as_f64().unwrap(), 0.0);

    write(
        dir.path(),
        "coherent.toml",
        "source = \"coherent_pair\"\nroi_pixels = 4\nmean_photons_per_region = 10000.0\nframes_per_run = 5000\nruns = 20\n",
    );
    ok(twinloss(dir.path(), &["calibrate", "--config", "coherent.toml", "--out", "coh.json"]));
    let v: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("coh.json")).unwrap()).unwrap();
    let p = &v["points"][0];
    assert!((p["sigma_gamma"]["value"].as_f64().unwrap() - 1.0).abs() < 0.02);
    assert!(p["eta_r_inferred"].is_null());
}

#[test]
fn invalid_configs_fail_without_output() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.toml", "eta_pp = 0.5\nframes = 3\n");
    let out = twinloss(dir.path(), &["sweep", "--config", "bad.toml", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`eta_pp`") && err.contains("`frames`"), "{err}");

    write(dir.path(), "range.toml", "eta_p = 2.0\nruns = 1\nestimators = [\"ratio\", \"psychic\"]\n");
    let out =
        twinloss(dir.path(), &["sweep", "--config", "range.toml", "--alpha", "0.1,1.5", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["eta_p", "runs", "psychic", "alpha = 1.5"] {
        assert!(err.contains(needle), "missing {needle} in {err}");
    }
    assert!(!dir.path().join("x.csv").exists());
    assert!(!dir.path().join("x.json").exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);

    let out = twinloss(dir.path(), &["sweep", "--config", "missing.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));

    let out = Command::new(env!("CARGO_BIN_EXE_twinloss"))
        .current_dir(dir.path())
        .env("TWINLOSS_THREADS", "zero")
        .args(["bounds"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "small.toml", SMALL);
    let out = twinloss(
        dir.path(),
        &["sweep", "--config", "small.toml", "--alpha", "0.1", "--out", "no/such/dir/s.csv"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no/such/dir"));
}
