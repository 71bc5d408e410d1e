use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{sha256_hex, LoadedConfig};
use crate::error::{AcavError, Result};

pub const RUN_MANIFEST: &str = "run_manifest.json";

/// Provenance for one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub config_path: Option<PathBuf>,
    /// Effective master seed after command-line overrides.
    pub seed: u64,
    /// SHA-256 of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<PathBuf>,
    /// Wall-clock milliseconds per stage.
    pub timings_ms: BTreeMap<String, u128>,
}

impl RunManifest {
    pub fn new(command: &str, config: &LoadedConfig) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config.hash.clone(),
            config_path: config.path.clone(),
            seed: config.config.seed,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| AcavError::io(path, e))?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(())
    }

    /// Runs `f`, recording its wall-clock time under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.timings_ms.insert(stage.into(), start.elapsed().as_millis());
        Ok(out)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| AcavError::io(dir, e))?;
        let path = dir.join(RUN_MANIFEST);
        let body = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        fs::write(&path, body).map_err(|e| AcavError::io(&path, e))?;
        Ok(path)
    }
}
