use crate::error::{AcavError, Result};
use crate::tensor::Tensor;

/// Raster with 1 or 3 channels, pixels in `[0, 1]`, row-major and
/// channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(AcavError::Shape(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(AcavError::Shape(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        if pixels.len() != height * width * channels {
            return Err(AcavError::Shape(format!(
                "{height}x{width}x{channels} image needs {} values, got {}",
                height * width * channels,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(AcavError::Shape(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            channels,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            vec![value.clamp(0.0, 1.0); height * width * channels],
        )
    }

    /// Builds an image from arbitrary values, clamping each into `[0, 1]`.
    pub fn from_clamped(height: usize, width: usize, channels: usize, mut pixels: Vec<f32>) -> Result<Self> {
        for v in &mut pixels {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(height, width, channels, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f32 {
        self.pixels[(row * self.width + col) * self.channels + channel]
    }

    /// Writes one sample, clamped into `[0, 1]`.
    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: f32) {
        let v = if value.is_nan() { 0.0 } else { value.clamp(0.0, 1.0) };
        self.pixels[(row * self.width + col) * self.channels + channel] = v;
    }

    /// Mean over channels of a single pixel.
    pub fn mean_at(&self, row: usize, col: usize) -> f32 {
        let base = (row * self.width + col) * self.channels;
        self.pixels[base..base + self.channels].iter().sum::<f32>() / self.channels as f32
    }

    /// Rec. 709 luma for RGB, the value itself for grayscale.
    pub fn luminance_at(&self, row: usize, col: usize) -> f64 {
        if self.channels == 1 {
            return self.get(row, col, 0) as f64;
        }
        0.2126 * self.get(row, col, 0) as f64
            + 0.7152 * self.get(row, col, 1) as f64
            + 0.0722 * self.get(row, col, 2) as f64
    }

    /// Converts to a `[channels, height, width]` tensor for the network.
    /// Each pixel becomes `(v - INPUT_OFFSET) * INPUT_SCALE`, i.e. `[-2, 2]`.
    /// Plain SGD from Glorot init stalls on raw `[0, 1]` inputs.
    pub fn to_tensor(&self) -> Tensor<f32> {
        let plane = self.height * self.width;
        let mut data = vec![0.0f32; self.pixels.len()];
        for (i, px) in self.pixels.chunks_exact(self.channels).enumerate() {
            for (c, &v) in px.iter().enumerate() {
                data[c * plane + i] = (v - INPUT_OFFSET) * INPUT_SCALE;
            }
        }
        Tensor::new(vec![self.channels, self.height, self.width], data)
            .expect("image dimensions are positive")
    }
}

/// Subtracted from every pixel when an image becomes a network input.
pub const INPUT_OFFSET: f32 = 0.5;
/// Applied after the offset.
pub const INPUT_SCALE: f32 = 4.0;
