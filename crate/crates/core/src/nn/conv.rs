//! 2-D convolution over `[channels, height, width]` activations.
//!
//! Each output element accumulates its products in `f64` in the order
//! input channel, kernel row, kernel column, then adds the bias. The plane-wise
//! loops below keep that per-element order, so results match a naive
//! four-loop evaluation bit for bit.

use crate::tensor::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub in_height: usize,
    pub in_width: usize,
    pub kernel_height: usize,
    pub kernel_width: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn out_height(&self) -> usize {
        self.in_height + 2 * self.padding + 1 - self.kernel_height
    }

    pub fn out_width(&self) -> usize {
        self.in_width + 2 * self.padding + 1 - self.kernel_width
    }

    pub fn is_valid(&self) -> bool {
        self.in_channels > 0
            && self.out_channels > 0
            && self.kernel_height > 0
            && self.kernel_width > 0
            && self.in_height + 2 * self.padding >= self.kernel_height
            && self.in_width + 2 * self.padding >= self.kernel_width
    }

    #[inline]
    pub fn weight_index(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> usize {
        ((oc * self.in_channels + ic) * self.kernel_height + ky) * self.kernel_width + kx
    }

    /// Output positions `o` along one axis for which `o + k - padding` lands
    /// inside `[0, extent)`.
    #[inline]
    fn valid_range(k: usize, padding: usize, extent: usize, out_extent: usize) -> (usize, usize) {
        let start = padding.saturating_sub(k);
        let end = (extent + padding).saturating_sub(k).min(out_extent);
        (start, end.max(start))
    }
}

pub fn conv2d_forward<T: Real>(g: &ConvGeometry, input: &[T], weight: &[T], bias: &[T]) -> Vec<T> {
    let (oh, ow) = (g.out_height(), g.out_width());
    let plane_in = g.in_height * g.in_width;
    let mut out = Vec::with_capacity(g.out_channels * oh * ow);
    let mut acc = vec![0.0f64; oh * ow];
    let input64: Vec<f64> = input.iter().map(|v| v.as_f64()).collect();

    for oc in 0..g.out_channels {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for ic in 0..g.in_channels {
            let plane = &input64[ic * plane_in..(ic + 1) * plane_in];
            for ky in 0..g.kernel_height {
                let (y0, y1) = ConvGeometry::valid_range(ky, g.padding, g.in_height, oh);
                for kx in 0..g.kernel_width {
                    let w = weight[g.weight_index(oc, ic, ky, kx)].as_f64();
                    let (x0, x1) = ConvGeometry::valid_range(kx, g.padding, g.in_width, ow);
                    // An empty column range can start past the input plane.
                    if x0 == x1 {
                        continue;
                    }
                    for oy in y0..y1 {
                        let iy = oy + ky - g.padding;
                        let src = &plane[iy * g.in_width + x0 + kx - g.padding..][..x1 - x0];
                        let dst = &mut acc[oy * ow + x0..oy * ow + x1];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += w * s;
                        }
                    }
                }
            }
        }
        let b = bias[oc].as_f64();
        out.extend(acc.iter().map(|&a| T::from_f64(a + b)));
    }
    out
}

pub struct ConvGradients<T> {
    pub input: Vec<T>,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

pub fn conv2d_backward<T: Real>(
    g: &ConvGeometry,
    input: &[T],
    weight: &[T],
    grad_out: &[T],
) -> ConvGradients<T> {
    let (oh, ow) = (g.out_height(), g.out_width());
    let plane_in = g.in_height * g.in_width;
    let plane_out = oh * ow;
    let input64: Vec<f64> = input.iter().map(|v| v.as_f64()).collect();
    let grad64: Vec<f64> = grad_out.iter().map(|v| v.as_f64()).collect();

    let mut grad_in = vec![0.0f64; g.in_channels * plane_in];
    let mut grad_w = vec![T::zero(); weight.len()];
    let mut grad_b = Vec::with_capacity(g.out_channels);

    for oc in 0..g.out_channels {
        let gplane = &grad64[oc * plane_out..(oc + 1) * plane_out];
        grad_b.push(T::from_f64(gplane.iter().sum()));
        for ic in 0..g.in_channels {
            let plane = &input64[ic * plane_in..(ic + 1) * plane_in];
            let gin = &mut grad_in[ic * plane_in..(ic + 1) * plane_in];
            for ky in 0..g.kernel_height {
                let (y0, y1) = ConvGeometry::valid_range(ky, g.padding, g.in_height, oh);
                for kx in 0..g.kernel_width {
                    let wi = g.weight_index(oc, ic, ky, kx);
                    let w = weight[wi].as_f64();
                    let (x0, x1) = ConvGeometry::valid_range(kx, g.padding, g.in_width, ow);
                    if x0 == x1 {
                        continue;
                    }
                    let mut gw = 0.0f64;
                    for oy in y0..y1 {
                        let iy = oy + ky - g.padding;
                        let base = iy * g.in_width + x0 + kx - g.padding;
                        let src = &plane[base..base + (x1 - x0)];
                        let gsrc = &gplane[oy * ow + x0..oy * ow + x1];
                        gw += src.iter().zip(gsrc).map(|(x, d)| x * d).sum::<f64>();
                        for (gi, d) in gin[base..base + (x1 - x0)].iter_mut().zip(gsrc) {
                            *gi += w * d;
                        }
                    }
                    grad_w[wi] = T::from_f64(gw);
                }
            }
        }
    }

    ConvGradients {
        input: grad_in.into_iter().map(T::from_f64).collect(),
        weight: grad_w,
        bias: grad_b,
    }
}
