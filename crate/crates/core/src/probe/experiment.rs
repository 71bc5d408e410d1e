//! Augmentation sweeps: add concept patterns to healthy images the model is
//! confident about and measure how the probed activations move.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classify::Decision;
use super::metrics::{cosine_angle, delta_v, similarity_deviation, FlipMetrics};
use super::reference::{probe, probe_all, reference_from_probes, Probed, ReferenceVector};
use super::report::{AcavReport, ReportRow};
use crate::error::{AcavError, Result};
use crate::imaging::{Footprint, Image};
use crate::nn::Model;
use crate::rng;
use crate::synth::dataset::place_patch;
use crate::synth::{gen_pattern, ConceptKind, Domain, Label, PatternInstance, Sample, ScaleClass};
use crate::tensor::Tensor;

/// One augmentation setting: `count` patterns of each kind in `kinds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConceptConfig {
    /// Row label; defaults to the kinds joined with `+`.
    #[serde(default)]
    pub label: Option<String>,
    pub kinds: Vec<ConceptKind>,
    pub count: usize,
    #[serde(default = "default_scale")]
    pub scale: ScaleClass,
    #[serde(default = "default_intensity")]
    pub intensity: f32,
}

fn default_scale() -> ScaleClass {
    ScaleClass::Medium
}

fn default_intensity() -> f32 {
    1.0
}

impl ConceptConfig {
    pub fn new(kinds: &[ConceptKind], count: usize, scale: ScaleClass) -> Self {
        ConceptConfig {
            label: None,
            kinds: kinds.to_vec(),
            count,
            scale,
            intensity: 1.0,
        }
    }

    pub fn with_intensity(mut self, intensity: f32) -> Self {
        self.intensity = intensity;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn name(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            self.kinds
                .iter()
                .map(|k| k.as_str())
                .collect::<Vec<_>>()
                .join("+")
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() {
            return Err(AcavError::Config("concept config lists no kinds".into()));
        }
        if !(self.intensity.is_finite() && (0.0..=1.0).contains(&self.intensity)) {
            return Err(AcavError::Config(format!(
                "intensity must lie in [0, 1], got {}",
                self.intensity
            )));
        }
        Ok(())
    }
}

/// An original image and its augmented copy. The two differ only inside
/// `footprints`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPair {
    pub original: Image,
    pub augmented: Image,
    pub footprints: Vec<Footprint>,
    pub inventory: Vec<PatternInstance>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentOptions {
    pub seed: u64,
    pub margin: f64,
    pub domain: Domain,
    /// Pattern entropy of the training data, carried into the report.
    pub entropy: f64,
}

/// Adds `config` to `sample`. Pattern and placement streams derive from
/// `seed` only, so a pair is reproducible on its own.
pub fn augment(sample: &Sample, config: &ConceptConfig, domain: Domain, seed: u64) -> Result<AugmentedPair> {
    config.validate()?;
    let mut work = Sample {
        image: sample.image.clone(),
        mask: sample.mask.clone(),
        label: sample.label,
        inventory: Vec::new(),
        seed,
    };
    let mut footprints = Vec::new();
    let mut k = 0u64;
    for _ in 0..config.count {
        for &kind in &config.kinds {
            let patch = gen_pattern(kind, rng::derive_seed(seed, 2 * k), config.scale)?;
            let placed = place_patch(&mut work, &patch, domain, config.intensity, rng::derive_seed(seed, 2 * k + 1))?;
            footprints.push(Footprint {
                row: placed.row,
                col: placed.col,
                height: patch.height(),
                width: patch.width(),
            });
            work.inventory.push(PatternInstance {
                kind,
                scale: config.scale,
                row: placed.row,
                col: placed.col,
                height: patch.height(),
                width: patch.width(),
                intensity: config.intensity,
            });
            k += 1;
        }
    }
    Ok(AugmentedPair {
        original: sample.image.clone(),
        augmented: work.image,
        footprints,
        inventory: work.inventory,
    })
}

/// Class references for every probed layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct References {
    pub healthy: Vec<ReferenceVector>,
    pub diseased: Vec<ReferenceVector>,
}

impl References {
    pub fn compute(
        model: &Model<f32>,
        inputs: &[Tensor<f32>],
        labels: &[Label],
        layers: &[usize],
        margin: f64,
    ) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(AcavError::Dimension(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        let probed = probe_all(model, inputs, layers, margin)?;
        Ok(References {
            healthy: reference_from_probes(&probed, labels, Label::Healthy, layers)?,
            diseased: reference_from_probes(&probed, labels, Label::Diseased, layers)?,
        })
    }
}

/// Runs every config over the healthy pool and probes every layer.
///
/// The pool is first narrowed to images the model confidently calls healthy.
/// Pair `i` of config `c` uses the seed path `(seed, c, i)`. Errors abort
/// the whole run; no partial report is returned.
pub fn run_concept_experiment(
    model: &Model<f32>,
    references: &References,
    pool: &[Sample],
    configs: &[ConceptConfig],
    layers: &[usize],
    options: &ExperimentOptions,
) -> Result<AcavReport> {
    if configs.is_empty() {
        return Err(AcavError::Config("no concept configs to run".into()));
    }
    if layers.is_empty() {
        return Err(AcavError::Config("no probe layers requested".into()));
    }
    for c in configs {
        c.validate()?;
    }
    let ref_layers = |refs: &[ReferenceVector]| refs.iter().map(|r| r.layer).collect::<Vec<_>>();
    if ref_layers(&references.healthy) != layers || ref_layers(&references.diseased) != layers {
        return Err(AcavError::Config(
            "reference vectors do not cover the requested layers".into(),
        ));
    }

    let originals: Vec<(&Sample, Probed)> = pool
        .par_iter()
        .map(|s| Ok((s, probe(model, &s.image.to_tensor(), layers, options.margin)?)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|(s, p)| s.label == Label::Healthy && p.decision == Decision::Healthy)
        .collect();
    if originals.is_empty() {
        return Err(AcavError::NoDecision);
    }
    log::info!(
        "{} of {} pool images are confidently healthy",
        originals.len(),
        pool.len()
    );

    let mut rows = Vec::with_capacity(configs.len() * layers.len());
    for (ci, config) in configs.iter().enumerate() {
        let augmented: Vec<Probed> = originals
            .par_iter()
            .enumerate()
            .map(|(i, (s, _))| {
                let seed = rng::derive_path(options.seed, &[ci as u64, i as u64]);
                let pair = augment(s, config, options.domain, seed)?;
                probe(model, &pair.augmented.to_tensor(), layers, options.margin)
            })
            .collect::<Result<Vec<_>>>()?;

        let flips = FlipMetrics::from_decisions(
            originals
                .iter()
                .zip(&augmented)
                .map(|((_, o), a)| (o.decision, a.decision)),
        )?;

        for (li, &layer) in layers.iter().enumerate() {
            let pairs = || {
                originals
                    .iter()
                    .zip(&augmented)
                    .map(move |((_, o), a)| {
                        (&o.activations[li].values[..], &a.activations[li].values[..])
                    })
            };
            let healthy_ref = &references.healthy[li].values;
            let diseased_ref = &references.diseased[li].values;
            let sim = similarity_deviation(healthy_ref, pairs())?;
            let dv = delta_v(pairs())?;
            let mean_orig = mean_vector(pairs().map(|(o, _)| o));
            let mean_aug = mean_vector(pairs().map(|(_, a)| a));
            rows.push(ReportRow {
                concept: config.name(),
                kinds: config.kinds.clone(),
                count: config.count,
                scale: config.scale,
                intensity: config.intensity,
                layer,
                depth: layer_depth(model, layer),
                similarity_original: sim.original,
                similarity_augmented: sim.augmented,
                deviation: sim.deviation,
                delta_v: dv,
                flip_rate: flips.flip_rate,
                literal_ratio: flips.literal_ratio,
                angle_healthy: cosine_angle(&mean_aug, healthy_ref)?.degrees,
                angle_diseased: cosine_angle(&mean_aug, diseased_ref)?.degrees,
                original_angle_healthy: cosine_angle(&mean_orig, healthy_ref)?.degrees,
                original_angle_diseased: cosine_angle(&mean_orig, diseased_ref)?.degrees,
                samples: flips.decided,
                abstained: flips.augmented_abstained,
            });
        }
    }

    Ok(AcavReport {
        rows,
        entropy: options.entropy,
        seed: options.seed,
        margin: options.margin,
        config_hash: None,
    })
}

/// Element-wise mean, summed in iteration order.
fn mean_vector<'a>(vectors: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut sum: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for v in vectors {
        if sum.is_empty() {
            sum = vec![0.0; v.len()];
        }
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        n += 1;
    }
    sum.into_iter().map(|s| s / n as f64).collect()
}

/// "n-1", "n-2", ... when `layer` is a dense-block probe point, otherwise
/// the raw index.
pub fn layer_depth(model: &Model<f32>, layer: usize) -> String {
    (1..=model.layers().len())
        .find(|&d| model.probe_layer(d).ok() == Some(layer))
        .map(|d| format!("n-{d}"))
        .unwrap_or_else(|| format!("#{layer}"))
}
