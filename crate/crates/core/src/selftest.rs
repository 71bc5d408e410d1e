//! Independent oracles for the numeric engine: a naive convolution, a
//! per-neuron forward pass, and finite-difference gradient checks.
//!
//! They live in the library rather than in test code because the `selftest`
//! CLI command runs them too.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::nn::conv::{conv2d_forward, ConvGeometry};
use crate::nn::layer::maxpool_forward;
use crate::nn::{LayerSpec, Model};
use crate::rng;
use crate::tensor::{Real, Tensor};

/// Four nested loops over output channel, row, column and taps. Taps that
/// fall in the zero padding are skipped, and each output sums in `f64` in
/// (input channel, kernel row, kernel column) order before the bias.
pub fn naive_conv2d<T: Real>(g: &ConvGeometry, input: &[T], weight: &[T], bias: &[T]) -> Vec<T> {
    let (oh, ow) = (g.out_height(), g.out_width());
    let mut out = vec![T::zero(); g.out_channels * oh * ow];
    for oc in 0..g.out_channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0f64;
                for ic in 0..g.in_channels {
                    for ky in 0..g.kernel_height {
                        for kx in 0..g.kernel_width {
                            let iy = (oy + ky) as isize - g.padding as isize;
                            let ix = (ox + kx) as isize - g.padding as isize;
                            if iy < 0 || ix < 0 || iy >= g.in_height as isize || ix >= g.in_width as isize {
                                continue;
                            }
                            let x = input[(ic * g.in_height + iy as usize) * g.in_width + ix as usize];
                            acc += x.as_f64() * weight[g.weight_index(oc, ic, ky, kx)].as_f64();
                        }
                    }
                }
                out[(oc * oh + oy) * ow + ox] = T::from_f64(acc + bias[oc].as_f64());
            }
        }
    }
    out
}

/// Compares the optimized convolution with [`naive_conv2d`] on one random
/// geometry. Returns true when every output is bit-identical.
pub fn conv_oracle_case(seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = loop {
        let g = ConvGeometry {
            in_channels: rng.gen_range(1..=4),
            out_channels: rng.gen_range(1..=4),
            in_height: rng.gen_range(1..=12),
            in_width: rng.gen_range(1..=12),
            kernel_height: rng.gen_range(1..=5),
            kernel_width: rng.gen_range(1..=5),
            padding: rng.gen_range(0..=2),
        };
        if g.is_valid() {
            break g;
        }
    };
    let mut fill = |n: usize| -> Vec<f32> { (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect() };
    let input = fill(g.in_channels * g.in_height * g.in_width);
    let weight = fill(g.out_channels * g.in_channels * g.kernel_height * g.kernel_width);
    let bias = fill(g.out_channels);
    let fast = conv2d_forward(&g, &input, &weight, &bias);
    let slow = naive_conv2d(&g, &input, &weight, &bias);
    fast.len() == slow.len() && fast.iter().zip(&slow).all(|(a, b)| a.to_bits() == b.to_bits())
}

/// One neuron: `f(Σ_j w_j a_j + b)`.
pub fn neuron(weights: &[f64], inputs: &[f64], bias: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut z = bias;
    for (w, a) in weights.iter().zip(inputs) {
        z += w * a;
    }
    f(z)
}

/// Recomputes every dense layer of `model`, neuron by neuron, from the
/// layer's traced input, folding a directly following ReLU into the neuron.
/// Returns the largest absolute difference from the model's own outputs.
pub fn neuron_consistency(model: &Model<f64>, input: &Tensor<f64>) -> Result<f64> {
    let trace = model.forward_trace(input)?;
    let layers = model.layers();
    let mut worst = 0.0f64;
    for (i, layer) in layers.iter().enumerate() {
        let LayerSpec::Dense { inputs, outputs } = layer.spec else {
            continue;
        };
        let a = if i == 0 { input.data() } else { trace[i - 1].data() };
        let relu = matches!(layers.get(i + 1).map(|l| l.spec), Some(LayerSpec::Relu));
        let observed = if relu { trace[i + 1].data() } else { trace[i].data() };
        let w = layer.params[0].data();
        let b = layer.params[1].data();
        for k in 0..outputs {
            let expect = neuron(&w[k * inputs..(k + 1) * inputs], a, b[k], |z| {
                if relu {
                    z.max(0.0)
                } else {
                    z
                }
            });
            worst = worst.max((expect - observed[k]).abs());
        }
    }
    Ok(worst)
}

/// A small random model, input and target for gradient checking: at most
/// three parameterized layers and at most 500 parameters.
pub fn toy_model(seed: u64) -> Result<(Model<f64>, Tensor<f64>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (shape, specs) = match rng.gen_range(0..3) {
        0 => {
            let n = rng.gen_range(2..=8);
            let h = rng.gen_range(2..=10);
            let h2 = rng.gen_range(2..=10);
            (
                vec![n],
                vec![
                    LayerSpec::dense(n, h),
                    LayerSpec::Relu,
                    LayerSpec::dense(h, h2),
                    LayerSpec::Relu,
                    LayerSpec::dense(h2, 2),
                    LayerSpec::Softmax,
                ],
            )
        }
        1 => {
            let c = rng.gen_range(1..=2);
            let k = rng.gen_range(1..=3);
            let (h, w) = (rng.gen_range(4..=7), rng.gen_range(4..=7));
            let padding = rng.gen_range(0..=1);
            let conv = LayerSpec::Conv2d {
                in_channels: c,
                out_channels: k,
                kernel_height: 3,
                kernel_width: 3,
                padding,
            };
            let out = conv.output_shape(&[c, h, w])?;
            let flat = k * (out[1] / 2) * (out[2] / 2);
            (
                vec![c, h, w],
                vec![
                    conv,
                    LayerSpec::Relu,
                    LayerSpec::Maxpool2x2,
                    LayerSpec::Flatten,
                    LayerSpec::dense(flat, 2),
                    LayerSpec::Softmax,
                ],
            )
        }
        _ => {
            let c = rng.gen_range(1..=2);
            let (k1, k2) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
            let (h, w) = (rng.gen_range(4..=6), rng.gen_range(4..=6));
            let flat = k2 * h * w;
            (
                vec![c, h, w],
                vec![
                    LayerSpec::conv3x3(c, k1),
                    LayerSpec::Relu,
                    LayerSpec::conv3x3(k1, k2),
                    LayerSpec::Relu,
                    LayerSpec::Flatten,
                    LayerSpec::dense(flat, 2),
                    LayerSpec::Softmax,
                ],
            )
        }
    };
    let mut model = Model::<f64>::new(shape.clone(), specs, rng.gen())?;
    for layer in model.layers_mut() {
        for p in &mut layer.params {
            for v in p.data_mut() {
                *v = rng.gen_range(-0.8..0.8);
            }
        }
    }
    let n: usize = shape.iter().product();
    let input = Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    Ok((model, input, rng.gen_range(0..2)))
}

/// Relative error used by the gradient check; differences below `1e-8` in
/// absolute terms count as agreement.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff < 1e-8 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GradientCheck {
    pub checked: usize,
    /// Coordinates whose ±step perturbation moved a ReLU or max-pool decision;
    /// the loss is not differentiable across such kinks.
    pub skipped_kinks: usize,
    pub max_relative_error: f64,
    pub failures: usize,
}

/// ReLU signs and max-pool winners along the forward pass.
fn activation_pattern(model: &Model<f64>, input: &Tensor<f64>) -> Result<Vec<usize>> {
    let trace = model.forward_trace(input)?;
    let mut pattern = Vec::new();
    for (i, layer) in model.layers().iter().enumerate() {
        let x = if i == 0 { input } else { &trace[i - 1] };
        match layer.spec {
            LayerSpec::Relu => pattern.extend(x.data().iter().map(|&v| (v > 0.0) as usize)),
            LayerSpec::Maxpool2x2 => pattern.extend(maxpool_forward(x.shape(), x.data()).1),
            _ => {}
        }
    }
    Ok(pattern)
}

/// Central-difference check of every parameter gradient with the given
/// step. A coordinate fails when its relative error reaches `tolerance`.
pub fn gradient_check(
    model: &Model<f64>,
    input: &Tensor<f64>,
    target: usize,
    step: f64,
    tolerance: f64,
) -> Result<GradientCheck> {
    let (_, grads) = model.backward(input, target)?;
    let base = activation_pattern(model, input)?;
    let mut probe = model.clone();
    let mut report = GradientCheck::default();
    for (li, layer_grads) in grads.iter().enumerate() {
        for (pi, g) in layer_grads.iter().enumerate() {
            for k in 0..g.len() {
                let original = model.layers()[li].params[pi].data()[k];
                let mut eval = |v: f64| -> Result<(f64, bool)> {
                    probe.layers_mut()[li].params[pi].data_mut()[k] = v;
                    let (loss, _) = probe.backward(input, target)?;
                    Ok((loss, activation_pattern(&probe, input)? == base))
                };
                let (plus, same_plus) = eval(original + step)?;
                let (minus, same_minus) = eval(original - step)?;
                probe.layers_mut()[li].params[pi].data_mut()[k] = original;
                if !(same_plus && same_minus) {
                    report.skipped_kinks += 1;
                    continue;
                }
                let numeric = (plus - minus) / (2.0 * step);
                let err = relative_error(g.data()[k], numeric);
                report.checked += 1;
                report.max_relative_error = report.max_relative_error.max(err);
                if err >= tolerance {
                    report.failures += 1;
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SelftestReport {
    pub gradient_models: usize,
    pub gradient: GradientCheck,
    pub conv_cases: usize,
    pub conv_mismatches: usize,
    pub max_neuron_error: f64,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.gradient.failures == 0 && self.conv_mismatches == 0 && self.max_neuron_error < 1e-12
    }
}

/// Gradient checks on `models` toy models (step `1e-4`, tolerance `1e-3`),
/// the convolution oracle on `conv_cases` random geometries, and the
/// per-neuron forward check on every toy model.
pub fn run_selftest(models: usize, conv_cases: usize, seed: u64) -> Result<SelftestReport> {
    let mut report = SelftestReport {
        gradient_models: models,
        conv_cases,
        ..Default::default()
    };
    for i in 0..models {
        let (model, input, target) = toy_model(rng::derive_path(seed, &[0, i as u64]))?;
        let g = gradient_check(&model, &input, target, 1e-4, 1e-3)?;
        report.gradient.checked += g.checked;
        report.gradient.skipped_kinks += g.skipped_kinks;
        report.gradient.failures += g.failures;
        report.gradient.max_relative_error = report.gradient.max_relative_error.max(g.max_relative_error);
        report.max_neuron_error = report.max_neuron_error.max(neuron_consistency(&model, &input)?);
    }
    report.conv_mismatches = (0..conv_cases)
        .filter(|&i| !conv_oracle_case(rng::derive_path(seed, &[1, i as u64])))
        .count();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_models_respect_size_limits() {
        for s in 0..50 {
            let (m, _, _) = toy_model(s).unwrap();
            assert!(m.parameter_count() <= 500, "seed {s}: {}", m.parameter_count());
            let parameterized = m.layers().iter().filter(|l| !l.params.is_empty()).count();
            assert!(parameterized <= 3);
        }
    }

    #[test]
    fn neuron_formula() {
        assert_eq!(neuron(&[1.0, -2.0], &[3.0, 1.0], 0.5, |z| z), 1.5);
        assert_eq!(neuron(&[1.0, -2.0], &[1.0, 1.0], 0.5, |z: f64| z.max(0.0)), 0.0);
    }

    #[test]
    fn small_selftest_passes() {
        let r = run_selftest(5, 5, 3).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.gradient.checked > 0);
    }
}
