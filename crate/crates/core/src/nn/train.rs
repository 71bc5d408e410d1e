use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{Gradients, Model, NUM_CLASSES};
use crate::error::{AcavError, Result};
use crate::rng;
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub master_seed: u64,
}

impl TrainConfig {
    pub fn validate(&self, dataset_len: usize) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(AcavError::TrainConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.batch_size > dataset_len {
            return Err(AcavError::TrainConfig(format!(
                "batch size {} must be in 1..={dataset_len}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T = f32> {
    pub model: Model<T>,
    /// Mean training loss of each epoch.
    pub history: Vec<f64>,
}

/// Plain mini-batch gradient descent on the softmax cross-entropy loss.
///
/// Samples are visited in an order reshuffled every epoch from
/// `config.master_seed`. Per-sample gradients may be computed in parallel but
/// are always summed in batch order, so the result is a pure function of the
/// initial model, the dataset, and the config.
pub fn train<T: Real>(
    model: Model<T>,
    inputs: &[Tensor<T>],
    labels: &[usize],
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    if inputs.len() != labels.len() {
        return Err(AcavError::Dimension(format!(
            "{} inputs but {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&l| l >= NUM_CLASSES) {
        return Err(AcavError::TrainConfig(format!("label {bad} is not a class")));
    }
    if !(0..NUM_CLASSES).all(|c| labels.contains(&c)) {
        return Err(AcavError::TrainConfig(
            "training data must contain both classes".into(),
        ));
    }
    config.validate(inputs.len())?;

    let mut model = model;
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..inputs.len()).collect();

    for epoch in 0..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(config.master_seed, &[epoch as u64]));

        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let per_sample: Vec<Result<(f64, Gradients<T>)>> = batch
                .par_iter()
                .map(|&i| model.backward(&inputs[i], labels[i]))
                .collect();
            let mut acc = GradientAccumulator::zeros_like(&model);
            for result in per_sample {
                let (loss, grads) = result.map_err(|e| match e {
                    AcavError::NonFinite { .. } => AcavError::TrainingDiverged {
                        epoch: epoch + 1,
                        loss: f64::NAN,
                    },
                    other => other,
                })?;
                loss_sum += loss;
                acc.add(&grads);
            }
            acc.apply(&mut model, config.learning_rate, batch.len());
        }

        let mean = loss_sum / inputs.len() as f64;
        if !mean.is_finite() {
            return Err(AcavError::TrainingDiverged {
                epoch: epoch + 1,
                loss: mean,
            });
        }
        log::debug!("epoch {} mean loss {mean:.6}", epoch + 1);
        history.push(mean);
    }

    Ok(TrainOutcome { model, history })
}

/// Sums per-sample gradients in `f64` and averages them over a batch.
pub struct GradientAccumulator {
    sums: Vec<Vec<Vec<f64>>>,
}

impl GradientAccumulator {
    pub fn zeros_like<T: Real>(model: &Model<T>) -> Self {
        Self {
            sums: model
                .layers()
                .iter()
                .map(|l| l.params.iter().map(|p| vec![0.0; p.len()]).collect())
                .collect(),
        }
    }

    pub fn add<T: Real>(&mut self, grads: &Gradients<T>) {
        for (layer, g) in self.sums.iter_mut().zip(grads) {
            for (sum, t) in layer.iter_mut().zip(g) {
                for (s, v) in sum.iter_mut().zip(t.data()) {
                    *s += v.as_f64();
                }
            }
        }
    }

    /// Mean gradient over `count` samples, one tensor per parameter tensor.
    pub fn mean<T: Real>(&self, model: &Model<T>, count: usize) -> Gradients<T> {
        let n = count as f64;
        self.sums
            .iter()
            .zip(model.layers())
            .map(|(layer, l)| {
                layer
                    .iter()
                    .zip(&l.params)
                    .map(|(sum, p)| {
                        Tensor::new(
                            p.shape().to_vec(),
                            sum.iter().map(|s| T::from_f64(s / n)).collect(),
                        )
                        .expect("accumulator mirrors parameter shapes")
                    })
                    .collect()
            })
            .collect()
    }

    fn apply<T: Real>(&self, model: &mut Model<T>, learning_rate: f64, count: usize) {
        let n = count as f64;
        for (layer, sums) in model.layers_mut().iter_mut().zip(&self.sums) {
            for (param, sum) in layer.params.iter_mut().zip(sums) {
                for (w, s) in param.data_mut().iter_mut().zip(sum) {
                    *w = T::from_f64(w.as_f64() - learning_rate * (s / n));
                }
            }
        }
    }
}
