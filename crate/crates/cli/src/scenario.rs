//! Scenario files: one TOML document describing a complete experiment.
use std::path::{Path, PathBuf};

use cimsim_core::bisc::BiscParams;
use cimsim_core::dnn::{InferOptions, RangeCalibration, TrainConfig};
use cimsim_core::metrics::SnrStimulus;
use cimsim_core::nonideality::ProfileSpec;
use cimsim_core::ArrayConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Failure;

/// Major version of the scenario, report and model file formats.
pub const SCHEMA_MAJOR: u32 = 1;
pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: String,
    /// Master seed; every random stream of the run is derived from it.
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub array: ArrayConfig,
    #[serde(default)]
    pub profile: ProfileSpec,
    #[serde(default)]
    pub bisc: BiscParams,
    #[serde(default)]
    pub snr: SnrStimulus,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub dnn: Option<DnnSection>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    /// Measured energy per inference cycle, joules.
    pub energy_per_inference: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self { energy_per_inference: 16.9e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DnnSection {
    /// Directory holding `images-idx3-ubyte[.gz]` and `labels-idx1-ubyte[.gz]`.
    pub data_dir: PathBuf,
    /// Size of the seeded held-out evaluation subset; the remaining images train the model.
    #[serde(default = "default_test_count")]
    pub test_count: usize,
    /// Pre-trained float model file; trained from scratch when absent.
    #[serde(default)]
    pub float_model: Option<PathBuf>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub ranges: RangeCalibration,
    #[serde(default)]
    pub infer: InferOptions,
}

fn default_test_count() -> usize {
    2000
}

impl Scenario {
    /// Default chip parameters with the given seed.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            seed,
            output_dir: default_output_dir(),
            array: ArrayConfig::default(),
            profile: ProfileSpec::default(),
            bisc: BiscParams::default(),
            snr: SnrStimulus::default(),
            metrics: MetricsSection::default(),
            dnn: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        let sc: Scenario = toml::from_str(text).map_err(|e| Failure::config(format!("scenario: {e}")))?;
        check_version(&sc.schema_version, "scenario")?;
        sc.validate()?;
        Ok(sc)
    }

    /// Reads a scenario and resolves its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let mut sc = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        sc.resolve_paths(base);
        Ok(sc)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Some(d) = &mut self.dnn {
            fix(&mut d.data_dir);
            if let Some(m) = &mut d.float_model {
                fix(m);
            }
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let cfg = |e: cimsim_core::Error| Failure::config(e.to_string());
        self.array.validate().map_err(cfg)?;
        self.profile.validate().map_err(cfg)?;
        self.bisc.validate().map_err(cfg)?;
        if self.snr.instances < 2 {
            return Err(Failure::config("snr.instances must be at least 2"));
        }
        if !(self.metrics.energy_per_inference > 0.0) {
            return Err(Failure::config("metrics.energy_per_inference must be positive"));
        }
        if let Some(d) = &self.dnn {
            if d.test_count == 0 {
                return Err(Failure::config("dnn.test_count must be at least 1"));
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of the scenario, independent of where the file lives.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        if let Some(d) = &mut canonical.dnn {
            d.data_dir = d.data_dir.file_name().map(PathBuf::from).unwrap_or_default();
            d.float_model = d.float_model.as_ref().and_then(|m| m.file_name().map(PathBuf::from));
        }
        let json = serde_json::to_vec(&canonical).expect("scenario serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Accepts `"<major>.<minor>"` strings whose major version this build understands.
pub fn check_version(version: &str, what: &str) -> Result<(), Failure> {
    let major = version.split('.').next().and_then(|m| m.parse::<u32>().ok());
    match major {
        Some(SCHEMA_MAJOR) => Ok(()),
        Some(m) => Err(Failure::config(format!("{what}: unsupported schema major version {m} (expected {SCHEMA_MAJOR})"))),
        None => Err(Failure::config(format!("{what}: malformed schema version {version:?}"))),
    }
}
