//! Labeled synthetic datasets and their on-disk layout.
//!
//! A dataset directory holds one image per sample (`sample_NNNN.ppm` for
//! fundus, `.pgm` for MRI), one anatomy mask per sample
//! (`sample_NNNN_mask.pgm`) and `manifest.json`:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "config_hash": "…",
//!   "spec": { … },
//!   "samples": [
//!     {"path": "sample_0000.ppm", "mask": "sample_0000_mask.pgm",
//!      "label": "diseased", "seed": 123,
//!      "inventory": [{"kind": "bleeding", "scale": "medium",
//!                     "row": 20, "col": 31, "height": 11, "width": 11,
//!                     "intensity": 0.93}]}
//!   ],
//!   "totals": {"bleeding": 1},
//!   "proportions": {"bleeding": 1.0},
//!   "entropy": 0.0
//! }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Poisson, WeightedIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::background::{gen_background, Domain};
use super::pattern::{gen_pattern, ConceptKind, ScaleClass};
use crate::error::{AcavError, Result};
use crate::imaging::{self, compose, Image, PlacementSampler};
use crate::probe::metrics::pattern_entropy;
use crate::rng;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Minimum centre distance between patterns placed in one image.
pub const PATTERN_SPACING: f64 = 4.0;

const PLACEMENT_ATTEMPTS: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Healthy,
    Diseased,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Label::Healthy),
            1 => Some(Label::Diseased),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Healthy => "healthy",
            Label::Diseased => "diseased",
        }
    }
}

fn default_scale_mix() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}

fn default_side() -> usize {
    64
}

/// Everything that determines a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub domain: Domain,
    pub healthy: usize,
    pub diseased: usize,
    /// Expected number of patterns of each kind in one diseased image.
    /// Healthy images never carry patterns.
    pub frequencies: BTreeMap<ConceptKind, f64>,
    /// Relative weights of small, medium and large patterns.
    #[serde(default = "default_scale_mix")]
    pub scale_mix: [f64; 3],
    #[serde(default = "default_side")]
    pub height: usize,
    #[serde(default = "default_side")]
    pub width: usize,
    #[serde(default)]
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(domain: Domain, healthy: usize, diseased: usize, seed: u64) -> Self {
        Self {
            domain,
            healthy,
            diseased,
            frequencies: BTreeMap::new(),
            scale_mix: default_scale_mix(),
            height: default_side(),
            width: default_side(),
            seed,
        }
    }

    pub fn with_frequency(mut self, kind: ConceptKind, expected: f64) -> Self {
        self.frequencies.insert(kind, expected);
        self
    }

    pub fn with_scale_mix(mut self, mix: [f64; 3]) -> Self {
        self.scale_mix = mix;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.height < 16 || self.width < 16 {
            return Err(AcavError::Config(format!(
                "image size {}x{} is below the 16x16 minimum",
                self.height, self.width
            )));
        }
        for (kind, &f) in &self.frequencies {
            if !(f.is_finite() && f >= 0.0) {
                return Err(AcavError::Config(format!(
                    "frequency of {kind} must be a non-negative number, got {f}"
                )));
            }
            if kind.channels() > self.domain.channels() && f > 0.0 {
                return Err(AcavError::Config(format!(
                    "{kind} patterns are color and cannot appear in {} images",
                    self.domain.as_str()
                )));
            }
        }
        if self.diseased > 0 && self.frequencies.values().all(|&f| f == 0.0) {
            return Err(AcavError::Config(
                "diseased samples need at least one pattern kind with positive frequency".into(),
            ));
        }
        if self.scale_mix.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || self.scale_mix.iter().sum::<f64>() <= 0.0
        {
            return Err(AcavError::Config(format!(
                "scale mix {:?} must be non-negative with a positive sum",
                self.scale_mix
            )));
        }
        Ok(())
    }

    /// Expected kind proportions implied by the frequency table.
    pub fn expected_proportions(&self) -> BTreeMap<ConceptKind, f64> {
        let total: f64 = self.frequencies.values().sum();
        self.frequencies
            .iter()
            .filter(|(_, &f)| f > 0.0)
            .map(|(&k, &f)| (k, f / total))
            .collect()
    }
}

/// One pattern composited into a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternInstance {
    pub kind: ConceptKind,
    pub scale: ScaleClass,
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
    pub intensity: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Image,
    pub mask: Image,
    pub label: Label,
    pub inventory: Vec<PatternInstance>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub spec: DatasetSpec,
    pub samples: Vec<Sample>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    /// Number of composited patterns of each kind, recounted from the inventories.
    pub fn totals(&self) -> BTreeMap<ConceptKind, usize> {
        let mut totals = BTreeMap::new();
        for p in self.samples.iter().flat_map(|s| &s.inventory) {
            *totals.entry(p.kind).or_insert(0) += 1;
        }
        totals
    }

    pub fn proportions(&self) -> BTreeMap<ConceptKind, f64> {
        let totals = self.totals();
        let n: usize = totals.values().sum();
        totals
            .into_iter()
            .map(|(k, c)| (k, c as f64 / n as f64))
            .collect()
    }

    /// Entropy (natural log) of the pattern-kind distribution; 0 when the
    /// dataset carries no patterns.
    pub fn entropy(&self) -> f64 {
        let p: Vec<f64> = self.proportions().into_values().collect();
        if p.is_empty() {
            return 0.0;
        }
        pattern_entropy(&p).expect("proportions from counts are normalized")
    }

    /// Network inputs and class indices.
    pub fn training_set(&self) -> (Vec<crate::Tensor<f32>>, Vec<usize>) {
        self.samples
            .iter()
            .map(|s| (s.image.to_tensor(), s.label.index()))
            .unzip()
    }
}

/// Generates the dataset described by `spec`. Healthy samples come first,
/// then diseased ones. Sample `i` draws from its own stream derived from
/// `(spec.seed, i)`, so the result does not depend on the thread count.
pub fn gen_dataset(spec: &DatasetSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let total = spec.healthy + spec.diseased;
    let samples = (0..total)
        .into_par_iter()
        .map(|i| {
            let label = if i < spec.healthy {
                Label::Healthy
            } else {
                Label::Diseased
            };
            gen_sample(spec, i, label)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledDataset {
        spec: spec.clone(),
        samples,
    })
}

fn gen_sample(spec: &DatasetSpec, index: usize, label: Label) -> Result<Sample> {
    let seed = rng::derive_seed(spec.seed, index as u64);
    let bg = gen_background(spec.domain, spec.height, spec.width, rng::derive_seed(seed, 0))?;
    let mut sample = Sample {
        image: bg.image,
        mask: bg.mask,
        label,
        inventory: Vec::new(),
        seed,
    };
    if label == Label::Healthy {
        return Ok(sample);
    }

    let mut rng = rng::stream(seed, &[1]);
    let mut draws: Vec<ConceptKind> = Vec::new();
    for (&kind, &f) in &spec.frequencies {
        if f > 0.0 {
            let n = Poisson::new(f)
                .map_err(|e| AcavError::Generation(e.to_string()))?
                .sample(&mut rng) as usize;
            draws.extend(std::iter::repeat(kind).take(n));
        }
    }
    if draws.is_empty() {
        // a diseased image needs at least one pattern; pick proportionally to frequency
        let kinds: Vec<(ConceptKind, f64)> =
            spec.frequencies.iter().filter(|(_, &f)| f > 0.0).map(|(&k, &f)| (k, f)).collect();
        let pick = WeightedIndex::new(kinds.iter().map(|(_, f)| *f))
            .map_err(|e| AcavError::Generation(e.to_string()))?
            .sample(&mut rng);
        draws.push(kinds[pick].0);
    }
    let scales = WeightedIndex::new(spec.scale_mix).map_err(|e| AcavError::Generation(e.to_string()))?;

    for (k, kind) in draws.into_iter().enumerate() {
        let scale = ScaleClass::ALL[scales.sample(&mut rng)];
        let intensity = rng.gen_range(0.85f32..=1.0);
        let patch = gen_pattern(kind, rng::derive_seed(seed, 100 + k as u64), scale)?;
        let placed = place_patch(
            &mut sample,
            &patch,
            spec.domain,
            intensity,
            rng::derive_seed(seed, 1000 + k as u64),
        )?;
        sample.inventory.push(PatternInstance {
            kind,
            scale,
            row: placed.row,
            col: placed.col,
            height: patch.height(),
            width: patch.width(),
            intensity,
        });
    }
    Ok(sample)
}

/// Composites `patch` near the sample's anatomy, away from patterns already
/// present. Retries with fresh seeds, then relaxes spacing, before giving up.
pub(crate) fn place_patch(
    sample: &mut Sample,
    patch: &imaging::AlphaPatch,
    domain: Domain,
    intensity: f32,
    seed: u64,
) -> Result<imaging::Placement> {
    let sampler = PlacementSampler::new(domain.placement_radius(), (patch.height(), patch.width()));
    let occupied: Vec<(usize, usize)> = sample
        .inventory
        .iter()
        .map(|p| (p.row + p.height / 2, p.col + p.width / 2))
        .collect();
    let mut last_err = None;
    for attempt in 0..PLACEMENT_ATTEMPTS {
        let spacing = if attempt < PLACEMENT_ATTEMPTS / 2 { PATTERN_SPACING } else { 0.0 };
        match sampler.sample_avoiding(&sample.mask, 1, spacing, rng::derive_seed(seed, attempt), &occupied) {
            Ok(p) => {
                let placement = p[0].with_intensity(intensity);
                sample.image = compose(&sample.image, patch, &placement)?;
                return Ok(placement);
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(AcavError::Generation(format!(
        "could not place a {} pattern after {PLACEMENT_ATTEMPTS} attempts: {}",
        patch.kind,
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSample {
    pub path: String,
    pub mask: String,
    pub label: Label,
    pub inventory: Vec<PatternInstance>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub config_hash: Option<String>,
    pub spec: DatasetSpec,
    pub samples: Vec<ManifestSample>,
    pub totals: BTreeMap<ConceptKind, usize>,
    pub proportions: BTreeMap<ConceptKind, f64>,
    pub entropy: f64,
}

impl Manifest {
    pub fn from_dataset(dataset: &LabeledDataset, config_hash: Option<&str>) -> Self {
        let ext = if dataset.spec.domain.channels() == 1 { "pgm" } else { "ppm" };
        Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            config_hash: config_hash.map(str::to_owned),
            spec: dataset.spec.clone(),
            samples: dataset
                .samples
                .iter()
                .enumerate()
                .map(|(i, s)| ManifestSample {
                    path: format!("sample_{i:04}.{ext}"),
                    mask: format!("sample_{i:04}_mask.pgm"),
                    label: s.label,
                    inventory: s.inventory.clone(),
                    seed: s.seed,
                })
                .collect(),
            totals: dataset.totals(),
            proportions: dataset.proportions(),
            entropy: dataset.entropy(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes images, masks and `manifest.json` into `dir` (created if needed).
/// Every image header carries the config hash when one is given.
pub fn write_dataset(dataset: &LabeledDataset, dir: &Path, config_hash: Option<&str>) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| AcavError::io(dir, e))?;
    let manifest = Manifest::from_dataset(dataset, config_hash);
    let comment = config_hash.map(|h| format!("config_hash {h}"));
    let comments: Vec<&str> = comment.iter().map(String::as_str).collect();
    let mut written = Vec::with_capacity(2 * dataset.len() + 1);
    for (s, m) in dataset.samples.iter().zip(&manifest.samples) {
        let img = dir.join(&m.path);
        imaging::netpbm::save_image_with_comments(&s.image, &img, &comments)?;
        let mask = dir.join(&m.mask);
        imaging::netpbm::save_image_with_comments(&s.mask, &mask, &comments)?;
        written.push(img);
        written.push(mask);
    }
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest.to_json()).map_err(|e| AcavError::io(&path, e))?;
    written.push(path);
    Ok(written)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| AcavError::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| AcavError::json(&path, e))?;
    if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(AcavError::Format(format!(
            "{}: manifest schema {} is not supported (expected {MANIFEST_SCHEMA_VERSION})",
            path.display(),
            manifest.schema_version
        )));
    }
    Ok(manifest)
}

/// Reads a dataset written by [`write_dataset`]. Pixel values come back
/// quantized to 8 bits.
pub fn load_dataset(dir: &Path) -> Result<LabeledDataset> {
    let manifest = read_manifest(dir)?;
    let samples = manifest
        .samples
        .iter()
        .map(|m| {
            Ok(Sample {
                image: imaging::load_image(&dir.join(&m.path))?,
                mask: imaging::load_image(&dir.join(&m.mask))?,
                label: m.label,
                inventory: m.inventory.clone(),
                seed: m.seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledDataset {
        spec: manifest.spec,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_soundness_small() {
        let spec = DatasetSpec::new(Domain::Fundus, 3, 3, 1)
            .with_frequency(ConceptKind::Bleeding, 0.2);
        let ds = gen_dataset(&spec).unwrap();
        for s in &ds.samples {
            assert_eq!(s.label == Label::Diseased, !s.inventory.is_empty());
        }
    }

    #[test]
    fn spec_validation() {
        let spec = DatasetSpec::new(Domain::Fundus, 1, 1, 0);
        assert!(spec.validate().is_err(), "diseased without frequencies");
        let spec = DatasetSpec::new(Domain::Mri, 1, 1, 0).with_frequency(ConceptKind::Bleeding, 1.0);
        assert!(spec.validate().is_err(), "color pattern in MRI");
        let spec = DatasetSpec::new(Domain::Fundus, 1, 1, 0)
            .with_frequency(ConceptKind::Bleeding, 1.0)
            .with_scale_mix([0.0; 3]);
        assert!(spec.validate().is_err());
        let spec = DatasetSpec::new(Domain::Fundus, 2, 0, 0);
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn spec_json_rejects_unknown_keys() {
        let ok = r#"{"domain":"mri","healthy":1,"diseased":1,"frequencies":{"tumor":1.0}}"#;
        let spec: DatasetSpec = serde_json::from_str(ok).unwrap();
        assert_eq!(spec.height, 64);
        let bad = r#"{"domain":"mri","healthy":1,"diseased":1,"frequencies":{},"colour":1}"#;
        assert!(serde_json::from_str::<DatasetSpec>(bad).is_err());
    }
}
