//! Concept pattern generators.
//!
//! - fatty dots: cluster of 3-8 small bright yellowish dots
//! - cotton wool: one soft-edged pale blob
//! - bleeding: irregular dark red blob, the largest fundus pattern
//! - tumor: bright grayscale mass for MRI scenes

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AcavError, Result};
use crate::imaging::{AlphaPatch, Image};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConceptKind {
    FattyDots,
    CottonWool,
    Bleeding,
    Tumor,
}

impl ConceptKind {
    pub const ALL: [ConceptKind; 4] = [
        ConceptKind::FattyDots,
        ConceptKind::CottonWool,
        ConceptKind::Bleeding,
        ConceptKind::Tumor,
    ];
    pub const FUNDUS: [ConceptKind; 3] = [
        ConceptKind::FattyDots,
        ConceptKind::CottonWool,
        ConceptKind::Bleeding,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConceptKind::FattyDots => "fatty_dots",
            ConceptKind::CottonWool => "cotton_wool",
            ConceptKind::Bleeding => "bleeding",
            ConceptKind::Tumor => "tumor",
        }
    }

    pub fn channels(self) -> usize {
        match self {
            ConceptKind::Tumor => 1,
            _ => 3,
        }
    }

    /// Square patch side for each scale class.
    pub fn side(self, scale: ScaleClass) -> usize {
        let sides = match self {
            ConceptKind::FattyDots => [5, 7, 9],
            ConceptKind::CottonWool => [6, 8, 10],
            ConceptKind::Bleeding => [8, 11, 14],
            ConceptKind::Tumor => [5, 9, 16],
        };
        sides[scale as usize]
    }
}

impl fmt::Display for ConceptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConceptKind {
    type Err = AcavError;

    fn from_str(s: &str) -> Result<Self> {
        ConceptKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| AcavError::Config(format!("unknown concept kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleClass {
    Small = 0,
    Medium = 1,
    Large = 2,
}

impl ScaleClass {
    pub const ALL: [ScaleClass; 3] = [ScaleClass::Small, ScaleClass::Medium, ScaleClass::Large];

    pub fn as_str(self) -> &'static str {
        match self {
            ScaleClass::Small => "small",
            ScaleClass::Medium => "medium",
            ScaleClass::Large => "large",
        }
    }
}

impl fmt::Display for ScaleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn gen_pattern(kind: ConceptKind, seed: u64, scale: ScaleClass) -> Result<AlphaPatch> {
    let side = kind.side(scale);
    let mut rng = rng::stream(seed, &[kind as u64, scale as u64]);
    let n = side * side;
    let mut alpha = vec![0.0f32; n];
    let mut pixels = vec![0.0f32; n * kind.channels()];
    let mid = (side as f64 - 1.0) / 2.0;

    match kind {
        ConceptKind::FattyDots => {
            let dots: Vec<(f64, f64, f64)> = (0..rng.gen_range(3..=8))
                .map(|_| {
                    let spread = mid * 0.55;
                    (
                        mid + rng.gen_range(-spread..=spread),
                        mid + rng.gen_range(-spread..=spread),
                        rng.gen_range(0.5..0.75) * (side as f64 / 7.0).sqrt(),
                    )
                })
                .collect();
            for r in 0..side {
                for c in 0..side {
                    let a = dots
                        .iter()
                        .map(|&(y, x, s)| gauss(r as f64 - y, c as f64 - x, s))
                        .fold(0.0, f64::max);
                    let i = r * side + c;
                    alpha[i] = (1.25 * a).min(1.0) as f32;
                    let color = [1.0, 0.93 + rng.gen_range(-0.03..0.03), 0.42];
                    pixels[i * 3..i * 3 + 3].copy_from_slice(&color.map(|v: f64| v as f32));
                }
            }
        }
        ConceptKind::CottonWool => {
            let (cy, cx) = (mid + rng.gen_range(-0.5..0.5), mid + rng.gen_range(-0.5..0.5));
            let sigma = side as f64 / 4.0;
            let (sy, sx) = (sigma * rng.gen_range(0.85..1.15), sigma * rng.gen_range(0.85..1.15));
            let peak = rng.gen_range(0.8..0.92);
            for r in 0..side {
                for c in 0..side {
                    let dy = (r as f64 - cy) / sy;
                    let dx = (c as f64 - cx) / sx;
                    let i = r * side + c;
                    alpha[i] = (peak * (-(dy * dy + dx * dx) / 2.0).exp()) as f32;
                    let color = [0.96, 0.94, 0.86];
                    pixels[i * 3..i * 3 + 3].copy_from_slice(&color.map(|v: f64| v as f32));
                }
            }
        }
        ConceptKind::Bleeding => {
            let lobes: Vec<(f64, f64, f64)> = (0..rng.gen_range(3..=5))
                .map(|_| {
                    let spread = mid * 0.35;
                    (
                        mid + rng.gen_range(-spread..=spread),
                        mid + rng.gen_range(-spread..=spread),
                        side as f64 * rng.gen_range(0.12..0.2),
                    )
                })
                .collect();
            for r in 0..side {
                for c in 0..side {
                    let a: f64 = lobes
                        .iter()
                        .map(|&(y, x, s)| gauss(r as f64 - y, c as f64 - x, s))
                        .sum();
                    let i = r * side + c;
                    alpha[i] = (1.5 * a).min(1.0) as f32;
                    let shade = rng.gen_range(-0.03..0.03);
                    let color = [0.24 + shade, 0.02, 0.03];
                    pixels[i * 3..i * 3 + 3].copy_from_slice(&color.map(|v: f64| v as f32));
                }
            }
        }
        ConceptKind::Tumor => {
            let ry = mid * rng.gen_range(0.75..0.95);
            let rx = mid * rng.gen_range(0.75..0.95);
            let edge = (side as f64 / 8.0).max(1.0);
            let brightness = rng.gen_range(0.85..0.95);
            for r in 0..side {
                for c in 0..side {
                    let dy = (r as f64 - mid) / ry;
                    let dx = (c as f64 - mid) / rx;
                    let rad = (dy * dy + dx * dx).sqrt();
                    // distance inside the boundary, in pixels
                    let inside = (1.0 - rad) * ry.min(rx);
                    let i = r * side + c;
                    alpha[i] = smoothstep(-edge / 2.0, edge, inside) as f32;
                    pixels[i] = (brightness + rng.gen_range(-0.05..0.05)) as f32;
                }
            }
        }
    }

    let pattern = Image::from_clamped(side, side, kind.channels(), pixels)?;
    let mut patch = AlphaPatch::new(pattern, alpha, kind.as_str())?;
    patch.scale = side as f32 / kind.side(ScaleClass::Small) as f32;
    Ok(patch)
}

fn gauss(dy: f64, dx: f64, sigma: f64) -> f64 {
    (-(dy * dy + dx * dx) / (2.0 * sigma * sigma)).exp()
}

fn smoothstep(lo: f64, hi: f64, x: f64) -> f64 {
    let t = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}
