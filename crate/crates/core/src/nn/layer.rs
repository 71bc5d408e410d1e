use serde::{Deserialize, Serialize};

use super::conv::{conv2d_backward, conv2d_forward, ConvGeometry};
use crate::error::{AcavError, Result};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel_height: usize,
        kernel_width: usize,
        padding: usize,
    },
    Relu,
    Maxpool2x2,
    Flatten,
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Softmax,
}

impl LayerSpec {
    pub fn conv3x3(in_channels: usize, out_channels: usize) -> Self {
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel_height: 3,
            kernel_width: 3,
            padding: 1,
        }
    }

    pub fn dense(inputs: usize, outputs: usize) -> Self {
        LayerSpec::Dense { inputs, outputs }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Relu => "relu",
            LayerSpec::Maxpool2x2 => "maxpool2x2",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Softmax => "softmax",
        }
    }

    /// Shapes of the parameter tensors: `[weight, bias]` for conv2d and dense,
    /// nothing otherwise.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel_height,
                kernel_width,
                ..
            } => vec![
                vec![out_channels, in_channels, kernel_height, kernel_width],
                vec![out_channels],
            ],
            LayerSpec::Dense { inputs, outputs } => vec![vec![outputs, inputs], vec![outputs]],
            _ => Vec::new(),
        }
    }

    /// `(fan_in, fan_out)` used for weight initialization.
    pub fn fans(&self) -> Option<(usize, usize)> {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel_height,
                kernel_width,
                ..
            } => {
                let k = kernel_height * kernel_width;
                Some((in_channels * k, out_channels * k))
            }
            LayerSpec::Dense { inputs, outputs } => Some((inputs, outputs)),
            _ => None,
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |why: &str| {
            Err(AcavError::Model(format!(
                "{} layer cannot accept input shape {input:?}: {why}",
                self.name()
            )))
        };
        match *self {
            LayerSpec::Conv2d { in_channels, .. } => {
                let [c, h, w] = input else {
                    return mismatch("expected [channels, height, width]");
                };
                if *c != in_channels {
                    return mismatch("channel count differs");
                }
                let g = self.geometry(*h, *w);
                if !g.is_valid() {
                    return mismatch("kernel larger than padded input");
                }
                Ok(vec![g.out_channels, g.out_height(), g.out_width()])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Maxpool2x2 => {
                let [c, h, w] = input else {
                    return mismatch("expected [channels, height, width]");
                };
                if *h < 2 || *w < 2 {
                    return mismatch("spatial size below 2");
                }
                Ok(vec![*c, h / 2, w / 2])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Dense { inputs, outputs } => {
                if input != [inputs] {
                    return mismatch("expected a flat vector of matching width");
                }
                Ok(vec![outputs])
            }
            LayerSpec::Softmax => {
                if input.len() != 1 {
                    return mismatch("expected a flat vector");
                }
                Ok(input.to_vec())
            }
        }
    }

    /// Convolution geometry for an input of the given size. Panics for
    /// layers other than `Conv2d`.
    pub fn geometry(&self, in_height: usize, in_width: usize) -> ConvGeometry {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel_height,
                kernel_width,
                padding,
            } => ConvGeometry {
                in_channels,
                out_channels,
                in_height,
                in_width,
                kernel_height,
                kernel_width,
                padding,
            },
            _ => unreachable!("geometry requested for a non-convolution layer"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T = f32> {
    pub spec: LayerSpec,
    pub params: Vec<Tensor<T>>,
}

impl<T: Real> Layer<T> {
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let out_shape = self.spec.output_shape(input.shape())?;
        let x = input.data();
        let data = match self.spec {
            LayerSpec::Conv2d { .. } => {
                let g = self.spec.geometry(input.shape()[1], input.shape()[2]);
                conv2d_forward(&g, x, self.params[0].data(), self.params[1].data())
            }
            LayerSpec::Relu => x.iter().map(|&v| v.max(T::zero())).collect(),
            LayerSpec::Maxpool2x2 => maxpool_forward(input.shape(), x).0,
            LayerSpec::Flatten => x.to_vec(),
            LayerSpec::Dense { inputs, outputs } => {
                let w = self.params[0].data();
                let b = self.params[1].data();
                (0..outputs)
                    .map(|i| {
                        let row = &w[i * inputs..(i + 1) * inputs];
                        let acc: f64 = row.iter().zip(x).map(|(w, a)| w.as_f64() * a.as_f64()).sum();
                        T::from_f64(acc + b[i].as_f64())
                    })
                    .collect()
            }
            LayerSpec::Softmax => softmax(x).into_iter().map(T::from_f64).collect(),
        };
        Tensor::new(out_shape, data)
    }

    /// Propagates `grad_out` (dL/d output) back through the layer.
    ///
    /// Returns dL/d input and the parameter gradients. The softmax layer is
    /// handled by the model together with the loss and is rejected here.
    pub fn backward(
        &self,
        input: &Tensor<T>,
        grad_out: &Tensor<T>,
    ) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
        let x = input.data();
        let g = grad_out.data();
        let shape = input.shape().to_vec();
        match self.spec {
            LayerSpec::Conv2d { .. } => {
                let geom = self.spec.geometry(shape[1], shape[2]);
                let grads = conv2d_backward(&geom, x, self.params[0].data(), g);
                Ok((
                    Tensor::new(shape, grads.input)?,
                    vec![
                        Tensor::new(self.params[0].shape().to_vec(), grads.weight)?,
                        Tensor::new(self.params[1].shape().to_vec(), grads.bias)?,
                    ],
                ))
            }
            LayerSpec::Relu => {
                let gi = x
                    .iter()
                    .zip(g)
                    .map(|(&v, &d)| if v > T::zero() { d } else { T::zero() })
                    .collect();
                Ok((Tensor::new(shape, gi)?, Vec::new()))
            }
            LayerSpec::Maxpool2x2 => {
                let (_, argmax) = maxpool_forward(&shape, x);
                let mut gi = vec![T::zero(); x.len()];
                for (&src, &d) in argmax.iter().zip(g) {
                    gi[src] = gi[src] + d;
                }
                Ok((Tensor::new(shape, gi)?, Vec::new()))
            }
            LayerSpec::Flatten => Ok((Tensor::new(shape, g.to_vec())?, Vec::new())),
            LayerSpec::Dense { inputs, outputs } => {
                let w = self.params[0].data();
                let mut gw = Vec::with_capacity(inputs * outputs);
                for &d in g.iter().take(outputs) {
                    let d = d.as_f64();
                    gw.extend(x.iter().map(|a| T::from_f64(d * a.as_f64())));
                }
                let gi = (0..inputs)
                    .map(|j| {
                        let acc: f64 = (0..outputs)
                            .map(|i| w[i * inputs + j].as_f64() * g[i].as_f64())
                            .sum();
                        T::from_f64(acc)
                    })
                    .collect();
                Ok((
                    Tensor::new(shape, gi)?,
                    vec![
                        Tensor::new(vec![outputs, inputs], gw)?,
                        Tensor::new(vec![outputs], g.to_vec())?,
                    ],
                ))
            }
            LayerSpec::Softmax => Err(AcavError::Model(
                "softmax is only supported as the final layer, fused with the loss".into(),
            )),
        }
    }
}

/// Numerically stable softmax evaluated in `f64`.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<f64> {
    let max = logits
        .iter()
        .map(|v| v.as_f64())
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v.as_f64() - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// 2×2 max pooling with stride 2; odd trailing rows/columns are dropped.
/// Returns the pooled values and, per output, the flat index of the winning
/// input (first maximum in row-major window order).
pub(crate) fn maxpool_forward<T: Real>(shape: &[usize], x: &[T]) -> (Vec<T>, Vec<usize>) {
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut arg = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + (2 * oy) * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                arg.push(best);
            }
        }
    }
    (out, arg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maxpool_picks_window_maximum() {
        let x: Vec<f32> = vec![
            1.0, 5.0, 2.0, 0.0, //
            3.0, 4.0, 9.0, 1.0, //
            0.0, 0.0, 0.0, 0.0, //
            0.0, 7.0, 0.0, 8.0,
        ];
        let layer = Layer {
            spec: LayerSpec::Maxpool2x2,
            params: Vec::new(),
        };
        let out = layer
            .forward(&Tensor::new(vec![1, 4, 4], x).unwrap())
            .unwrap();
        assert_eq!(out.shape(), &[1, 2, 2]);
        assert_eq!(out.data(), &[5.0, 9.0, 7.0, 8.0]);
    }

    #[test]
    fn maxpool_drops_odd_edge() {
        assert_eq!(
            LayerSpec::Maxpool2x2.output_shape(&[2, 5, 7]).unwrap(),
            vec![2, 2, 3]
        );
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let p = softmax(&[1000.0f32, 1000.0]);
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn dense_rejects_wrong_width() {
        assert!(LayerSpec::dense(4, 2).output_shape(&[3]).is_err());
        assert!(LayerSpec::conv3x3(3, 4).output_shape(&[1, 8, 8]).is_err());
    }
}
