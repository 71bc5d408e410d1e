use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layer::{softmax, Layer, LayerSpec};
use crate::error::{AcavError, Result};
use crate::tensor::{Real, Tensor};

/// Number of output classes. Class 0 is healthy, class 1 is diseased.
pub const NUM_CLASSES: usize = 2;

/// Width of the probed penultimate layer in the classifier architecture.
pub const PENULTIMATE_WIDTH: usize = 64;

/// Activations of one layer for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationVector {
    pub layer: usize,
    pub values: Vec<f64>,
}

impl ActivationVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Parameter gradients, laid out like [`Model::layers`]: one entry per layer,
/// each holding one tensor per parameter tensor of that layer.
pub type Gradients<T> = Vec<Vec<Tensor<T>>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T = f32> {
    input_shape: Vec<usize>,
    layers: Vec<Layer<T>>,
    penultimate_index: usize,
}

/// The classifier used throughout the toolkit: three 3×3 convolution blocks
/// (conv, ReLU, 2×2 max-pool) followed by three dense layers, the last of
/// which feeds a two-way softmax. The second dense layer is 64 wide and its
/// ReLU output is the probed penultimate activation.
pub fn classifier_specs(channels: usize, height: usize, width: usize) -> Vec<LayerSpec> {
    let (c1, c2, c3) = (8, 16, 16);
    let flat = c3 * (height / 8) * (width / 8);
    vec![
        LayerSpec::conv3x3(channels, c1),
        LayerSpec::Relu,
        LayerSpec::Maxpool2x2,
        LayerSpec::conv3x3(c1, c2),
        LayerSpec::Relu,
        LayerSpec::Maxpool2x2,
        LayerSpec::conv3x3(c2, c3),
        LayerSpec::Relu,
        LayerSpec::Maxpool2x2,
        LayerSpec::Flatten,
        LayerSpec::dense(flat, 128),
        LayerSpec::Relu,
        LayerSpec::dense(128, PENULTIMATE_WIDTH),
        LayerSpec::Relu,
        LayerSpec::dense(PENULTIMATE_WIDTH, NUM_CLASSES),
        LayerSpec::Softmax,
    ]
}

impl<T: Real> Model<T> {
    /// Validates the layer stack against `input_shape` and draws parameters.
    ///
    /// Weights are uniform in `[-s, s]` with `s = sqrt(6 / (fan_in + fan_out))`;
    /// biases start at zero.
    pub fn new(input_shape: Vec<usize>, specs: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .into_iter()
            .map(|spec| {
                let params = spec
                    .param_shapes()
                    .into_iter()
                    .enumerate()
                    .map(|(i, shape)| {
                        let mut t = Tensor::zeros(shape);
                        if i == 0 {
                            let (fan_in, fan_out) = spec.fans().expect("parametrized layer");
                            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
                            for v in t.data_mut() {
                                *v = T::from_f64(rng.gen_range(-s..=s));
                            }
                        }
                        t
                    })
                    .collect();
                Layer { spec, params }
            })
            .collect();
        Self::from_layers(input_shape, layers)
    }

    /// Assembles a model from already materialized layers.
    pub fn from_layers(input_shape: Vec<usize>, layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(AcavError::Model("model has no layers".into()));
        }
        let mut shape = input_shape.clone();
        for (i, layer) in layers.iter().enumerate() {
            let expected = layer.spec.param_shapes();
            let actual: Vec<Vec<usize>> =
                layer.params.iter().map(|p| p.shape().to_vec()).collect();
            if expected != actual {
                return Err(AcavError::Model(format!(
                    "layer {i} ({}) has parameter shapes {actual:?}, expected {expected:?}",
                    layer.spec.name()
                )));
            }
            shape = layer
                .spec
                .output_shape(&shape)
                .map_err(|e| AcavError::Model(format!("layer {i}: {e}")))?;
            if layer.spec == LayerSpec::Softmax && i + 1 != layers.len() {
                return Err(AcavError::Model(format!(
                    "softmax at layer {i} must be the final layer"
                )));
            }
        }
        if layers.last().map(|l| l.spec) != Some(LayerSpec::Softmax) || shape != [NUM_CLASSES] {
            return Err(AcavError::Model(format!(
                "final layer must be a softmax over exactly {NUM_CLASSES} classes, got output {shape:?}"
            )));
        }
        let last_dense = layers
            .iter()
            .rposition(|l| matches!(l.spec, LayerSpec::Dense { .. }))
            .ok_or_else(|| AcavError::Model("model has no dense layer".into()))?;
        if last_dense == 0 {
            return Err(AcavError::Model(
                "the output dense layer needs a preceding layer to probe".into(),
            ));
        }
        Ok(Self {
            input_shape,
            layers,
            penultimate_index: last_dense - 1,
        })
    }

    /// The classifier of [`classifier_specs`] for `[channels, height, width]` input.
    pub fn classifier(channels: usize, height: usize, width: usize, seed: u64) -> Result<Self> {
        Self::new(
            vec![channels, height, width],
            classifier_specs(channels, height, width),
            seed,
        )
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    /// Index of the layer whose output feeds the final dense layer.
    pub fn penultimate_index(&self) -> usize {
        self.penultimate_index
    }

    /// Index of the probe point `depth` dense blocks below the output:
    /// depth 1 is the penultimate activation ("layer n-1"), depth 2 is the
    /// activation feeding the dense layer before it ("layer n-2"), and so on.
    pub fn probe_layer(&self, depth: usize) -> Result<usize> {
        if depth == 0 {
            return Ok(self.layers.len() - 1);
        }
        let dense: Vec<usize> = self
            .layers
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l.spec, LayerSpec::Dense { .. }))
            .map(|(i, _)| i)
            .collect();
        match dense.len().checked_sub(depth) {
            Some(k) if dense[k] > 0 => Ok(dense[k] - 1),
            _ => Err(AcavError::Probe {
                index: usize::MAX,
                layers: self.layers.len(),
            }),
        }
    }

    pub fn layer_width(&self, index: usize) -> Result<usize> {
        let mut shape = self.input_shape.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            shape = layer.spec.output_shape(&shape)?;
            if i == index {
                return Ok(shape.iter().product());
            }
        }
        Err(AcavError::Probe {
            index,
            layers: self.layers.len(),
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| &l.params)
            .map(|p| p.len())
            .sum()
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            input_shape: self.input_shape.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    spec: l.spec,
                    params: l.params.iter().map(|p| p.cast()).collect(),
                })
                .collect(),
            penultimate_index: self.penultimate_index,
        }
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(AcavError::InputShape {
                expected: self.input_shape.clone(),
                actual: input.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Outputs of every layer, in order. The last entry is the class
    /// probability vector.
    pub fn forward_trace(&self, input: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        self.check_input(input)?;
        let mut outputs: Vec<Tensor<T>> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let x = outputs.last().unwrap_or(input);
            let y = layer.forward(x)?;
            if !y.all_finite() {
                return Err(AcavError::NonFinite {
                    layer: i,
                    kind: layer.spec.name(),
                });
            }
            outputs.push(y);
        }
        Ok(outputs)
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_trace(input)?.pop().expect("non-empty model"))
    }

    pub fn forward_probed(
        &self,
        input: &Tensor<T>,
        layer_index: usize,
    ) -> Result<(Tensor<T>, ActivationVector)> {
        if layer_index >= self.layers.len() {
            return Err(AcavError::Probe {
                index: layer_index,
                layers: self.layers.len(),
            });
        }
        let mut trace = self.forward_trace(input)?;
        let probed = ActivationVector {
            layer: layer_index,
            values: trace[layer_index].as_f64_vec(),
        };
        Ok((trace.pop().expect("non-empty model"), probed))
    }

    /// Probability of the healthy class (index 0).
    pub fn healthy_probability(&self, input: &Tensor<T>) -> Result<f64> {
        Ok(self.forward(input)?.data()[0].as_f64())
    }

    /// Cross-entropy loss and parameter gradients for a one-hot target.
    pub fn backward(&self, input: &Tensor<T>, target: usize) -> Result<(f64, Gradients<T>)> {
        if target >= NUM_CLASSES {
            return Err(AcavError::Dimension(format!(
                "target class {target} outside 0..{NUM_CLASSES}"
            )));
        }
        let mut dist = [0.0; NUM_CLASSES];
        dist[target] = 1.0;
        self.backward_soft(input, &dist)
    }

    /// Cross-entropy loss `-Σ y_k ln p_k` against an arbitrary target
    /// distribution `y`, and its gradients with respect to every parameter.
    pub fn backward_soft(&self, input: &Tensor<T>, target: &[f64]) -> Result<(f64, Gradients<T>)> {
        if target.len() != NUM_CLASSES {
            return Err(AcavError::Dimension(format!(
                "target distribution has {} entries, expected {NUM_CLASSES}",
                target.len()
            )));
        }
        let mass: f64 = target.iter().sum();
        if (mass - 1.0).abs() > 1e-9 || target.iter().any(|y| *y < 0.0) {
            return Err(AcavError::Dimension(format!(
                "target is not a probability distribution (sum {mass})"
            )));
        }
        let trace = self.forward_trace(input)?;
        let n = self.layers.len();
        let logits = if n >= 2 { &trace[n - 2] } else { input };

        // log-softmax from the logits keeps the loss finite for saturated outputs
        let z: Vec<f64> = logits.as_f64_vec();
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss: f64 = target.iter().zip(&z).map(|(y, z)| -y * (z - lse)).sum();
        if !loss.is_finite() {
            return Err(AcavError::NonFinite {
                layer: n - 1,
                kind: "softmax",
            });
        }
        let probs = softmax(logits.data());
        let grad_logits: Vec<T> = probs
            .iter()
            .zip(target)
            .map(|(p, y)| T::from_f64(p - y))
            .collect();

        let mut grads: Gradients<T> = vec![Vec::new(); n];
        let mut grad = Tensor::new(logits.shape().to_vec(), grad_logits)?;
        for i in (0..n - 1).rev() {
            let x = if i == 0 { input } else { &trace[i - 1] };
            let (gi, gp) = self.layers[i].backward(x, &grad)?;
            if !gi.all_finite() || gp.iter().any(|g| !g.all_finite()) {
                return Err(AcavError::NonFinite {
                    layer: i,
                    kind: self.layers[i].spec.name(),
                });
            }
            grads[i] = gp;
            grad = gi;
        }
        Ok((loss, grads))
    }
}
