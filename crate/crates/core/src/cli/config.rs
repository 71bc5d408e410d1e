//! Experiment configuration file.
//!
//! A JSON object; unknown keys are rejected at every level.
//!
//! ```json
//! {
//!   "seed": 1,
//!   "output_dir": "runs/fundus",
//!   "dataset": {
//!     "domain": "fundus", "healthy": 100, "diseased": 100,
//!     "frequencies": {"bleeding": 2.0, "fatty_dots": 1.5, "cotton_wool": 1.0}
//!   },
//!   "pool_size": 50,
//!   "train": {"learning_rate": 0.05, "epochs": 20, "batch_size": 8},
//!   "probe": {
//!     "margin": 0.2,
//!     "layers": [1, 2],
//!     "sweeps": [
//!       {"kinds": ["fatty_dots"], "count": 1},
//!       {"kinds": ["fatty_dots"], "count": 3}
//!     ]
//!   }
//! }
//! ```
//!
//! `probe.layers` counts dense blocks down from the output: 1 is the
//! penultimate activation, 2 the one below it. The master `seed` drives every
//! random stream; the dataset's own `seed` field is ignored.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AcavError, Result};
use crate::nn::TrainConfig;
use crate::probe::{ConceptConfig, DEFAULT_MARGIN};
use crate::rng;
use crate::synth::DatasetSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSettings {
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_layers")]
    pub layers: Vec<usize>,
    pub sweeps: Vec<ConceptConfig>,
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

fn default_layers() -> Vec<usize> {
    vec![1]
}

fn default_pool() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetSpec,
    /// Held-out healthy images that receive the concept patterns.
    #[serde(default = "default_pool")]
    pub pool_size: usize,
    pub train: TrainSettings,
    pub probe: ProbeSettings,
}

/// Stream ids under the master seed.
const DATA_STREAM: u64 = 1;
const POOL_STREAM: u64 = 2;
const TRAIN_STREAM: u64 = 3;
const INIT_STREAM: u64 = 4;
const PROBE_STREAM: u64 = 5;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        if self.pool_size == 0 {
            return Err(AcavError::Config("pool_size must be positive".into()));
        }
        if self.probe.sweeps.is_empty() {
            return Err(AcavError::Config("probe.sweeps is empty".into()));
        }
        if self.probe.layers.is_empty() || self.probe.layers.contains(&0) {
            return Err(AcavError::Config(
                "probe.layers must list depths of at least 1".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.probe.margin) {
            return Err(AcavError::Config(format!(
                "probe.margin must lie in [0, 0.5), got {}",
                self.probe.margin
            )));
        }
        for s in &self.probe.sweeps {
            s.validate()?;
            if let Some(k) = s.kinds.iter().find(|k| k.channels() != self.dataset.domain.channels()) {
                return Err(AcavError::Config(format!(
                    "{k} patterns do not fit the {} domain",
                    self.dataset.domain.as_str()
                )));
            }
        }
        Ok(())
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            seed: rng::derive_seed(self.seed, DATA_STREAM),
            ..self.dataset.clone()
        }
    }

    /// Healthy-only spec for the probe pool, drawn from its own stream.
    pub fn pool_spec(&self) -> DatasetSpec {
        DatasetSpec {
            healthy: self.pool_size,
            diseased: 0,
            seed: rng::derive_seed(self.seed, POOL_STREAM),
            ..self.dataset.clone()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            master_seed: rng::derive_seed(self.seed, TRAIN_STREAM),
        }
    }

    pub fn init_seed(&self) -> u64 {
        rng::derive_seed(self.seed, INIT_STREAM)
    }

    pub fn probe_seed(&self) -> u64 {
        rng::derive_seed(self.seed, PROBE_STREAM)
    }
}

/// A parsed config together with the hash of its exact bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub path: Option<PathBuf>,
    pub hash: String,
}

impl LoadedConfig {
    pub fn from_bytes(bytes: &[u8], path: Option<PathBuf>) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_slice(bytes).map_err(|e| AcavError::Json {
            path: path.clone().unwrap_or_else(|| PathBuf::from("<config>")),
            source: e,
        })?;
        config.validate()?;
        Ok(LoadedConfig {
            config,
            path,
            hash: sha256_hex(bytes),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| AcavError::io(path, e))?;
        Self::from_bytes(&bytes, Some(path.to_path_buf()))
    }

    /// Applies command-line overrides. Overrides are recorded separately in
    /// every manifest; the hash keeps describing the file.
    pub fn with_overrides(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        if let Some(s) = seed {
            self.config.seed = s;
        }
        if let Some(o) = out {
            self.config.output_dir = o;
        }
        self
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
