//! Concept patches and the composition operator that pastes them into an
//! image without touching anything outside the patch footprint.

use serde::{Deserialize, Serialize};

use super::image::Image;
use crate::error::{AcavError, Result};

/// A concept pattern with a per-pixel alpha mask.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaPatch {
    pub pattern: Image,
    /// Row-major, one value per pixel, each in `[0, 1]`.
    pub alpha: Vec<f32>,
    pub kind: String,
    pub scale: f32,
    pub intensity: f32,
}

impl AlphaPatch {
    pub fn new(pattern: Image, alpha: Vec<f32>, kind: impl Into<String>) -> Result<Self> {
        let patch = Self {
            pattern,
            alpha,
            kind: kind.into(),
            scale: 1.0,
            intensity: 1.0,
        };
        patch.validate()?;
        Ok(patch)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.pattern.height() * self.pattern.width();
        if self.alpha.len() != n {
            return Err(AcavError::Shape(format!(
                "alpha mask has {} values, pattern has {n} pixels",
                self.alpha.len()
            )));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(AcavError::Shape(format!("alpha {a} outside [0, 1]")));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(AcavError::Shape(format!(
                "nominal scale must be positive, got {}",
                self.scale
            )));
        }
        if !(0.0..=1.0).contains(&self.intensity) {
            return Err(AcavError::Shape(format!(
                "nominal intensity {} outside [0, 1]",
                self.intensity
            )));
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.pattern.height()
    }

    pub fn width(&self) -> usize {
        self.pattern.width()
    }

    #[inline]
    pub fn alpha_at(&self, row: usize, col: usize) -> f32 {
        self.alpha[row * self.width() + col]
    }

    /// The alpha mask as a single-channel image.
    pub fn alpha_image(&self) -> Image {
        Image::new(self.height(), self.width(), 1, self.alpha.clone())
            .expect("alpha validated on construction")
    }
}

/// Where and how strongly a patch is composited.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub row: usize,
    pub col: usize,
    pub scale: f32,
    pub intensity: f32,
}

impl Placement {
    pub fn at(row: usize, col: usize) -> Self {
        Self {
            row,
            col,
            scale: 1.0,
            intensity: 1.0,
        }
    }

    pub fn with_scale(mut self, scale: f32) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_intensity(mut self, intensity: f32) -> Self {
        self.intensity = intensity;
        self
    }
}

/// Pixel rectangle `[row, row + height) x [col, col + width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Footprint {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl Footprint {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.row && row < self.row + self.height && col >= self.col && col < self.col + self.width
    }
}

/// Blends `patch` into `image`.
///
/// With `t = alpha * placement.intensity * patch.intensity` (clamped to
/// `[0, 1]`), each covered sample becomes `(1 - t) * image + t * pattern`.
/// Pixels outside the (scaled) footprint are copied unchanged. Grayscale
/// patterns are broadcast across RGB images.
pub fn compose(image: &Image, patch: &AlphaPatch, placement: &Placement) -> Result<Image> {
    Ok(compose_with_footprint(image, patch, placement)?.0)
}

/// [`compose`], also returning the footprint that was written.
pub fn compose_with_footprint(
    image: &Image,
    patch: &AlphaPatch,
    placement: &Placement,
) -> Result<(Image, Footprint)> {
    if !(placement.intensity.is_finite() && placement.intensity >= 0.0) {
        return Err(AcavError::Placement(format!(
            "intensity multiplier must be non-negative, got {}",
            placement.intensity
        )));
    }
    let scaled;
    let patch = if placement.scale == 1.0 {
        patch
    } else {
        scaled = scale_patch(patch, placement.scale)?;
        &scaled
    };
    let fp = Footprint {
        row: placement.row,
        col: placement.col,
        height: patch.height(),
        width: patch.width(),
    };
    if fp.row + fp.height > image.height() || fp.col + fp.width > image.width() {
        return Err(AcavError::Placement(format!(
            "{}x{} patch at ({}, {}) exceeds {}x{} image",
            fp.height,
            fp.width,
            fp.row,
            fp.col,
            image.height(),
            image.width()
        )));
    }
    let pc = patch.pattern.channels();
    let ic = image.channels();
    if pc != ic && pc != 1 {
        return Err(AcavError::Placement(format!(
            "cannot composite a {pc}-channel pattern into a {ic}-channel image"
        )));
    }

    let gain = (placement.intensity as f64 * patch.intensity as f64).min(1.0);
    let mut out = image.clone();
    for r in 0..fp.height {
        for c in 0..fp.width {
            let t = (patch.alpha_at(r, c) as f64 * gain).clamp(0.0, 1.0);
            for ch in 0..ic {
                let x = image.get(fp.row + r, fp.col + c, ch) as f64;
                let p = patch.pattern.get(r, c, if pc == 1 { 0 } else { ch }) as f64;
                // x + t (p - x) is (1 - t) x + t p, exact at t = 0 and t = 1
                out.set(fp.row + r, fp.col + c, ch, (x + t * (p - x)) as f32);
            }
        }
    }
    Ok((out, fp))
}

/// Bilinear resampling of pattern and alpha by `factor`.
///
/// Output size is `round(size * factor)` per axis. Sample centres map back
/// with half-pixel alignment; interpolation is written as nested lerps so a
/// constant patch stays exactly constant.
pub fn scale_patch(patch: &AlphaPatch, factor: f32) -> Result<AlphaPatch> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(AcavError::Scale(format!(
            "scale factor must be positive, got {factor}"
        )));
    }
    let (h, w) = (patch.height(), patch.width());
    let nh = (h as f64 * factor as f64).round() as usize;
    let nw = (w as f64 * factor as f64).round() as usize;
    if nh == 0 || nw == 0 {
        return Err(AcavError::Scale(format!(
            "scaling {h}x{w} by {factor} leaves an empty patch"
        )));
    }
    if nh == h && nw == w {
        let mut same = patch.clone();
        same.scale *= factor;
        return Ok(same);
    }
    let ch = patch.pattern.channels();
    let (ry, rx) = (h as f64 / nh as f64, w as f64 / nw as f64);
    let mut pixels = Vec::with_capacity(nh * nw * ch);
    let mut alpha = Vec::with_capacity(nh * nw);
    for r in 0..nh {
        let sy = ((r as f64 + 0.5) * ry - 0.5).clamp(0.0, (h - 1) as f64);
        let (y0, wy) = (sy.floor() as usize, sy - sy.floor());
        let y1 = (y0 + 1).min(h - 1);
        for c in 0..nw {
            let sx = ((c as f64 + 0.5) * rx - 0.5).clamp(0.0, (w - 1) as f64);
            let (x0, wx) = (sx.floor() as usize, sx - sx.floor());
            let x1 = (x0 + 1).min(w - 1);
            let sample = |f: &dyn Fn(usize, usize) -> f64| {
                let top = lerp(f(y0, x0), f(y0, x1), wx);
                let bottom = lerp(f(y1, x0), f(y1, x1), wx);
                lerp(top, bottom, wy).clamp(0.0, 1.0) as f32
            };
            for k in 0..ch {
                pixels.push(sample(&|y, x| patch.pattern.get(y, x, k) as f64));
            }
            alpha.push(sample(&|y, x| patch.alpha_at(y, x) as f64));
        }
    }
    Ok(AlphaPatch {
        pattern: Image::new(nh, nw, ch, pixels)?,
        alpha,
        kind: patch.kind.clone(),
        scale: patch.scale * factor,
        intensity: patch.intensity,
    })
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_patch(n: usize, value: f32, alpha: f32) -> AlphaPatch {
        AlphaPatch::new(
            Image::filled(n, n, 1, value).unwrap(),
            vec![alpha; n * n],
            "test",
        )
        .unwrap()
    }

    #[test]
    fn zero_intensity_is_identity() {
        let img = Image::filled(8, 8, 3, 0.3).unwrap();
        let out = compose(&img, &flat_patch(3, 0.9, 1.0), &Placement::at(2, 2).with_intensity(0.0)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn opaque_paste_copies_pattern() {
        let img = Image::filled(6, 6, 1, 0.1).unwrap();
        let patch = flat_patch(2, 0.7, 1.0);
        let out = compose(&img, &patch, &Placement::at(1, 3)).unwrap();
        for r in 1..3 {
            for c in 3..5 {
                assert_eq!(out.get(r, c, 0), 0.7);
            }
        }
        assert_eq!(out.get(0, 0, 0), 0.1);
    }

    #[test]
    fn half_alpha_blend() {
        let img = Image::filled(4, 4, 1, 0.2).unwrap();
        let out = compose(&img, &flat_patch(1, 0.8, 0.5), &Placement::at(0, 0)).unwrap();
        assert!((out.get(0, 0, 0) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn out_of_bounds_is_an_error() {
        let img = Image::filled(4, 4, 1, 0.2).unwrap();
        let err = compose(&img, &flat_patch(2, 0.8, 1.0), &Placement::at(3, 0)).unwrap_err();
        assert!(matches!(err, AcavError::Placement(_)));
        let err = compose(&img, &flat_patch(2, 0.8, 1.0), &Placement::at(0, 0).with_scale(3.0)).unwrap_err();
        assert!(matches!(err, AcavError::Placement(_)));
    }

    #[test]
    fn rgb_pattern_into_gray_is_rejected() {
        let img = Image::filled(4, 4, 1, 0.2).unwrap();
        let patch = AlphaPatch::new(Image::filled(1, 1, 3, 0.5).unwrap(), vec![1.0], "x").unwrap();
        assert!(compose(&img, &patch, &Placement::at(0, 0)).is_err());
    }

    #[test]
    fn gray_pattern_broadcasts_over_rgb() {
        let img = Image::filled(2, 2, 3, 0.0).unwrap();
        let out = compose(&img, &flat_patch(1, 0.6, 1.0), &Placement::at(1, 1)).unwrap();
        assert_eq!(&out.pixels()[9..12], &[0.6, 0.6, 0.6]);
    }

    #[test]
    fn scale_dimensions() {
        let p = flat_patch(4, 0.3, 0.9);
        assert_eq!(scale_patch(&p, 1.0).unwrap().height(), 4);
        let doubled = scale_patch(&p, 2.0).unwrap();
        assert_eq!((doubled.height(), doubled.width()), (8, 8));
        assert_eq!(doubled.scale, 2.0);
        assert!(matches!(scale_patch(&p, 0.01), Err(AcavError::Scale(_))));
        assert!(matches!(scale_patch(&p, -1.0), Err(AcavError::Scale(_))));
    }

    #[test]
    fn scaling_a_constant_patch_keeps_it_constant() {
        let p = flat_patch(5, 0.37, 0.61);
        let s = scale_patch(&p, 1.7).unwrap();
        assert_eq!(s.height(), 9);
        assert!(s.pattern.pixels().iter().all(|&v| v == 0.37));
        assert!(s.alpha.iter().all(|&a| a == 0.61));
    }
}
