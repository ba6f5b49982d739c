//! Run configuration: a flat key-value file, every key optional.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use twinloss::channels::{ChannelConfig, SourceKind, SourceModel};
use twinloss::simlab::{Drift, EstimatorSpec, ExperimentPlan, FrameConfig};

/// Everything a sweep or calibration needs. Defaults reproduce the
/// η_P = η_R = 0.76 twin-beam acquisition with 5×10⁵ photons per region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// twin_beam, coherent_pair, fock_pair, split_classical or
    /// independent_thermal.
    pub source: String,
    /// Photons per mode (twin_beam, independent_thermal).
    pub mean_per_mode: f64,
    /// Fano factor of the beam before the splitter (split_classical).
    pub input_fano: f64,
    /// Splitter transmission toward the probe (split_classical).
    pub split_tau: f64,
    /// Reference to probe mean ratio (coherent_pair).
    pub reference_ratio: f64,

    pub eta_p: f64,
    pub eta_coll: f64,
    /// Swept sample losses.
    pub alpha: Vec<f64>,
    /// Swept reference detection efficiencies.
    pub eta_r: Vec<f64>,

    pub roi_pixels: usize,
    pub mean_photons_per_region: f64,
    pub dark_mean: f64,
    pub read_noise_sigma: f64,
    pub frames_per_run: usize,
    pub runs: usize,

    pub estimators: Vec<String>,
    /// Peak relative amplitude of a common source drift; 0 disables it.
    pub drift_amplitude: f64,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let frame = FrameConfig::default();
        Self {
            source: SourceKind::TwinBeam.as_str().to_string(),
            mean_per_mode: 2e-9,
            input_fano: 1.0,
            split_tau: 0.5,
            reference_ratio: 1.0,
            eta_p: 0.76,
            eta_coll: 1.0,
            alpha: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.7],
            eta_r: vec![0.76],
            roi_pixels: frame.roi_pixels,
            mean_photons_per_region: frame.mean_photons_per_region,
            dark_mean: frame.dark_mean,
            read_noise_sigma: frame.read_noise_sigma,
            frames_per_run: frame.frames_per_run,
            runs: frame.runs,
            estimators: EstimatorSpec::standard_set().iter().map(|s| s.label()).collect(),
            drift_amplitude: 0.0,
            seed: 1,
            out: PathBuf::from("sweep.csv"),
        }
    }
}

/// All problems found in a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub source: String,
    pub violations: Vec<String>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({}):", self.source)?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

impl RunConfig {
    /// Read a TOML file, or a JSON file such as a sweep sidecar.
    pub fn from_file(path: &Path) -> anyhow::Result<Result<Self, ValidationReport>> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        Ok(Self::parse(&text, is_json, &path.display().to_string()))
    }

    pub fn parse(text: &str, is_json: bool, source: &str) -> Result<Self, ValidationReport> {
        let report = |violations| ValidationReport { source: source.to_string(), violations };
        let value: serde_json::Value = if is_json {
            serde_json::from_str(text).map_err(|e| report(vec![e.to_string()]))?
        } else {
            let table: toml::Table =
                text.parse().map_err(|e: toml::de::Error| report(vec![e.to_string()]))?;
            serde_json::to_value(table).map_err(|e| report(vec![e.to_string()]))?
        };
        let Some(map) = value.as_object() else {
            return Err(report(vec!["expected a table of keys".into()]));
        };
        let known = Self::keys();
        let unknown: Vec<String> = map
            .keys()
            .filter(|k| !known.contains(k.as_str()))
            .map(|k| format!("unknown key `{k}`"))
            .collect();
        if !unknown.is_empty() {
            return Err(report(unknown));
        }
        // Deserialize key by key so that every type error is reported.
        let mut merged = serde_json::to_value(Self::default()).expect("config serializes");
        let mut violations = Vec::new();
        for (k, v) in map {
            let mut probe = serde_json::to_value(Self::default()).expect("config serializes");
            probe[k] = v.clone();
            match serde_json::from_value::<Self>(probe) {
                Ok(_) => merged[k] = v.clone(),
                Err(e) => violations.push(format!("`{k}`: {e}")),
            }
        }
        if !violations.is_empty() {
            return Err(report(violations));
        }
        serde_json::from_value(merged).map_err(|e| report(vec![e.to_string()]))
    }

    fn keys() -> BTreeSet<String> {
        match serde_json::to_value(Self::default()) {
            Ok(serde_json::Value::Object(m)) => m.keys().cloned().collect(),
            _ => BTreeSet::new(),
        }
    }

    /// Every constraint violation, empty when the configuration is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let unit = |name: &str, x: f64, v: &mut Vec<String>| {
            if !(0.0..=1.0).contains(&x) {
                v.push(format!("{name} = {x} must lie in [0, 1]"));
            }
        };
        match self.source.parse::<SourceKind>() {
            Err(_) => v.push(format!(
                "source = `{}` is not one of {}",
                self.source,
                SourceKind::ALL.map(|k| k.as_str()).join(", ")
            )),
            Ok(kind) => {
                if let Err(e) = self.source_model_of(kind) {
                    v.push(e.to_string());
                }
            }
        }
        unit("eta_p", self.eta_p, &mut v);
        if self.eta_p == 0.0 {
            v.push("eta_p must be positive".into());
        }
        unit("eta_coll", self.eta_coll, &mut v);
        if self.alpha.is_empty() {
            v.push("alpha needs at least one value".into());
        }
        for &a in &self.alpha {
            unit("alpha", a, &mut v);
        }
        if self.eta_r.is_empty() {
            v.push("eta_r needs at least one value".into());
        }
        for &e in &self.eta_r {
            unit("eta_r", e, &mut v);
            if e * self.eta_coll == 0.0 {
                v.push("the reference arm must detect light: eta_r * eta_coll > 0".into());
            }
        }
        if let Err(e) = self.frame().validate() {
            v.push(e.to_string());
        }
        if self.runs < 2 {
            v.push(format!("runs = {} must be at least 2 to estimate error bars", self.runs));
        }
        if self.estimators.is_empty() {
            v.push("estimators needs at least one entry".into());
        }
        let mut seen = BTreeSet::new();
        for label in &self.estimators {
            match label.parse::<EstimatorSpec>() {
                Ok(spec) => {
                    if !seen.insert(spec) {
                        v.push(format!("estimator `{label}` listed twice"));
                    }
                }
                Err(e) => v.push(e.to_string()),
            }
        }
        if !(self.drift_amplitude.is_finite() && (0.0..1.0).contains(&self.drift_amplitude)) {
            v.push(format!("drift_amplitude = {} must lie in [0, 1)", self.drift_amplitude));
        }
        v
    }

    pub fn validate(&self, source: &str) -> Result<(), ValidationReport> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ValidationReport { source: source.to_string(), violations })
        }
    }

    fn source_model_of(&self, kind: SourceKind) -> twinloss::Result<SourceModel> {
        // The scale is irrelevant: the frame pipeline rescales the source to
        // the requested detected photon number.
        match kind {
            SourceKind::TwinBeam => SourceModel::twin_beam(self.mean_per_mode, 1).and_then(positive_mode),
            SourceKind::IndependentThermal => {
                SourceModel::independent_thermal(self.mean_per_mode, 1).and_then(positive_mode)
            }
            SourceKind::CoherentPair => {
                if self.reference_ratio.is_nan() || self.reference_ratio <= 0.0 {
                    return Err(twinloss::Error::InvalidArgument(format!(
                        "reference_ratio = {} must be positive",
                        self.reference_ratio
                    )));
                }
                SourceModel::coherent_pair(1.0, self.reference_ratio)
            }
            SourceKind::FockPair => Ok(SourceModel::fock_pair(1)),
            SourceKind::SplitClassical => SourceModel::split_classical(1.0, self.input_fano, self.split_tau),
        }
    }

    pub fn source_model(&self) -> twinloss::Result<SourceModel> {
        let kind = self
            .source
            .parse()
            .map_err(|_| twinloss::Error::InvalidArgument(format!("unknown source `{}`", self.source)))?;
        self.source_model_of(kind)
    }

    pub fn frame(&self) -> FrameConfig {
        FrameConfig {
            roi_pixels: self.roi_pixels,
            mean_photons_per_region: self.mean_photons_per_region,
            dark_mean: self.dark_mean,
            read_noise_sigma: self.read_noise_sigma,
            frames_per_run: self.frames_per_run,
            runs: self.runs,
        }
    }

    pub fn estimator_specs(&self) -> Vec<EstimatorSpec> {
        self.estimators.iter().filter_map(|s| s.parse().ok()).collect()
    }

    pub fn channel(&self, alpha: f64, eta_r: f64) -> twinloss::Result<ChannelConfig> {
        ChannelConfig::new(self.eta_p, eta_r, self.eta_coll, alpha)
    }

    /// Plan of one sweep point.
    pub fn plan(&self, alpha: f64, eta_r: f64) -> twinloss::Result<ExperimentPlan> {
        Ok(ExperimentPlan {
            source: self.source_model()?,
            channel: self.channel(alpha, eta_r)?,
            frame: self.frame(),
            estimators: self.estimator_specs(),
            drift: (self.drift_amplitude > 0.0)
                .then(|| Drift::rising_over_run(self.drift_amplitude, self.frames_per_run)),
        })
    }
}

fn positive_mode(src: SourceModel) -> twinloss::Result<SourceModel> {
    match src {
        SourceModel::TwinBeam { mean_per_mode, .. }
        | SourceModel::IndependentThermal { mean_per_mode, .. }
            if mean_per_mode <= 0.0 =>
        {
            Err(twinloss::Error::InvalidArgument("mean_per_mode must be positive".into()))
        }
        s => Ok(s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_match_the_reference_setup() {
        let c = RunConfig::default();
        assert!(c.violations().is_empty(), "{:?}", c.violations());
        assert_eq!((c.eta_p, c.eta_r[0]), (0.76, 0.76));
        assert_eq!((c.frames_per_run, c.runs), (200, 10));
        assert_eq!(c.mean_photons_per_region, 5e5);
    }

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(RunConfig::parse("", false, "t").unwrap(), RunConfig::default());
    }

    #[test]
    fn toml_and_json_agree() {
        let toml = "eta_p = 0.9\nalpha = [0.1, 0.3]\nsource = \"coherent_pair\"\nseed = 7\n";
        let json = r#"{"eta_p": 0.9, "alpha": [0.1, 0.3], "source": "coherent_pair", "seed": 7}"#;
        let a = RunConfig::parse(toml, false, "t").unwrap();
        assert_eq!(a, RunConfig::parse(json, true, "j").unwrap());
        assert_eq!(a.alpha, vec![0.1, 0.3]);
        assert_eq!(a.runs, 10);
    }

    #[test]
    fn every_unknown_key_is_reported() {
        let err = RunConfig::parse("etap = 0.5\nrun = 3\nseed = 1\n", false, "t").unwrap_err();
        assert_eq!(err.violations.len(), 2);
        assert!(err.to_string().contains("`etap`") && err.to_string().contains("`run`"));
    }

    #[test]
    fn every_type_error_is_reported() {
        let err = RunConfig::parse("eta_p = \"high\"\nruns = -3\n", false, "t").unwrap_err();
        assert_eq!(err.violations.len(), 2);
    }

    #[test]
    fn every_range_violation_is_reported() {
        let c = RunConfig {
            eta_p: 1.5,
            alpha: vec![0.1, -0.2],
            runs: 1,
            estimators: vec!["ratio".into(), "magic".into(), "ratio".into()],
            source: "laser".into(),
            ..RunConfig::default()
        };
        let v = c.violations();
        assert_eq!(v.len(), 6, "{v:#?}");
    }

    #[test]
    fn sources_build() {
        for kind in SourceKind::ALL {
            let c = RunConfig { source: kind.as_str().into(), ..RunConfig::default() };
            assert_eq!(c.source_model().unwrap().kind(), kind);
        }
        let c = RunConfig { source: "split_classical".into(), input_fano: 0.5, ..RunConfig::default() };
        assert_eq!(c.violations().len(), 1);
    }
}
