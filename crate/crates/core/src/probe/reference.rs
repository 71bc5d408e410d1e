use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classify::Decision;
use crate::error::{AcavError, Result};
use crate::nn::{ActivationVector, Model};
use crate::synth::Label;
use crate::tensor::Tensor;

/// Mean activation of one class at one layer, over the samples the model
/// classified correctly and confidently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceVector {
    pub label: Label,
    pub layer: usize,
    pub values: Vec<f64>,
    pub count: usize,
}

/// Forward pass summary used by the probes: the confident decision and the
/// activations at the requested layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Probed {
    pub p_healthy: f64,
    pub decision: Decision,
    pub activations: Vec<ActivationVector>,
}

pub fn probe(model: &Model<f32>, input: &Tensor<f32>, layers: &[usize], margin: f64) -> Result<Probed> {
    let n = model.layers().len();
    if let Some(&bad) = layers.iter().find(|&&l| l >= n) {
        return Err(AcavError::Probe { index: bad, layers: n });
    }
    let trace = model.forward_trace(input)?;
    let p_healthy = trace[n - 1].data()[0] as f64;
    Ok(Probed {
        p_healthy,
        decision: Decision::from_probability(p_healthy, margin),
        activations: layers
            .iter()
            .map(|&l| ActivationVector {
                layer: l,
                values: trace[l].as_f64_vec(),
            })
            .collect(),
    })
}

/// Probes every input; results keep input order whatever the thread count.
pub fn probe_all(model: &Model<f32>, inputs: &[Tensor<f32>], layers: &[usize], margin: f64) -> Result<Vec<Probed>> {
    inputs
        .par_iter()
        .map(|x| probe(model, x, layers, margin))
        .collect()
}

/// Reference vectors for `class` at each of `layers`.
pub fn reference_vectors(
    model: &Model<f32>,
    inputs: &[Tensor<f32>],
    labels: &[Label],
    class: Label,
    layers: &[usize],
    margin: f64,
) -> Result<Vec<ReferenceVector>> {
    if inputs.len() != labels.len() {
        return Err(AcavError::Dimension(format!(
            "{} inputs but {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    let probed = probe_all(model, inputs, layers, margin)?;
    reference_from_probes(&probed, labels, class, layers)
}

/// Averages already-probed activations, keeping only samples labelled
/// `class` whose confident decision agrees with the label.
pub fn reference_from_probes(
    probed: &[Probed],
    labels: &[Label],
    class: Label,
    layers: &[usize],
) -> Result<Vec<ReferenceVector>> {
    layers
        .iter()
        .enumerate()
        .map(|(k, &layer)| {
            let mut sum: Vec<f64> = Vec::new();
            let mut count = 0usize;
            for (p, &label) in probed.iter().zip(labels) {
                if label != class || p.decision.label() != Some(class) {
                    continue;
                }
                let values = &p.activations[k].values;
                if sum.is_empty() {
                    sum = vec![0.0; values.len()];
                }
                for (s, v) in sum.iter_mut().zip(values) {
                    *s += v;
                }
                count += 1;
            }
            if count == 0 {
                return Err(AcavError::EmptyReference {
                    class: class.as_str(),
                    layer,
                });
            }
            Ok(ReferenceVector {
                label: class,
                layer,
                values: sum.into_iter().map(|s| s / count as f64).collect(),
                count,
            })
        })
        .collect()
}

pub fn reference_vector(
    model: &Model<f32>,
    inputs: &[Tensor<f32>],
    labels: &[Label],
    class: Label,
    layer: usize,
    margin: f64,
) -> Result<ReferenceVector> {
    Ok(reference_vectors(model, inputs, labels, class, &[layer], margin)?.remove(0))
}
