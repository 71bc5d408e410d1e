//! On-disk patch library: each patch is a pattern image (PGM or PPM), an
//! alpha PGM, and a JSON sidecar with the metadata.
//!
//! ```json
//! {"kind": "cotton_wool", "scale": 1.0, "intensity": 1.0,
//!  "pattern": "cotton_wool_0.ppm", "alpha": "cotton_wool_0_alpha.pgm"}
//! ```
//! Image paths are relative to the sidecar's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::compose::AlphaPatch;
use super::netpbm::{load_image, save_image};
use crate::error::{AcavError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSidecar {
    pub kind: String,
    pub scale: f32,
    pub intensity: f32,
    pub pattern: String,
    pub alpha: String,
}

/// Writes `<name>.pgm|ppm`, `<name>_alpha.pgm` and `<name>.json` into `dir`.
/// Returns the sidecar path.
pub fn save_patch(patch: &AlphaPatch, dir: &Path, name: &str) -> Result<PathBuf> {
    let ext = if patch.pattern.channels() == 1 { "pgm" } else { "ppm" };
    let pattern = format!("{name}.{ext}");
    let alpha = format!("{name}_alpha.pgm");
    save_image(&patch.pattern, &dir.join(&pattern))?;
    save_image(&patch.alpha_image(), &dir.join(&alpha))?;
    let sidecar = PatchSidecar {
        kind: patch.kind.clone(),
        scale: patch.scale,
        intensity: patch.intensity,
        pattern,
        alpha,
    };
    let path = dir.join(format!("{name}.json"));
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| AcavError::json(&path, e))?;
    std::fs::write(&path, text).map_err(|e| AcavError::io(&path, e))?;
    Ok(path)
}

pub fn load_patch(sidecar_path: &Path) -> Result<AlphaPatch> {
    let text = std::fs::read_to_string(sidecar_path).map_err(|e| AcavError::io(sidecar_path, e))?;
    let sidecar: PatchSidecar =
        serde_json::from_str(&text).map_err(|e| AcavError::json(sidecar_path, e))?;
    let dir = sidecar_path.parent().unwrap_or(Path::new("."));
    let pattern = load_image(&dir.join(&sidecar.pattern))?;
    let alpha = load_image(&dir.join(&sidecar.alpha))?;
    if alpha.channels() != 1 || alpha.height() != pattern.height() || alpha.width() != pattern.width() {
        return Err(AcavError::Format(format!(
            "{}: alpha must be a single-channel image the size of the pattern",
            sidecar_path.display()
        )));
    }
    let patch = AlphaPatch {
        pattern,
        alpha: alpha.pixels().to_vec(),
        kind: sidecar.kind,
        scale: sidecar.scale,
        intensity: sidecar.intensity,
    };
    patch.validate()?;
    Ok(patch)
}
