//! Synthetic scene backgrounds: a fundus-like retina with vessels, and an
//! MRI-like axial brain slice.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::imaging::Image;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Fundus,
    Mri,
}

impl Domain {
    pub fn channels(self) -> usize {
        match self {
            Domain::Fundus => 3,
            Domain::Mri => 1,
        }
    }

    /// Dilation applied to the anatomy mask when choosing pattern sites:
    /// fundus patterns go near vessels, tumors go inside brain tissue.
    pub fn placement_radius(self) -> usize {
        match self {
            Domain::Fundus => crate::imaging::DEFAULT_DILATION_RADIUS,
            Domain::Mri => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Fundus => "fundus",
            Domain::Mri => "mri",
        }
    }
}

/// Geometry of the fundus disc, exposed for containment checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub center_row: f64,
    pub center_col: f64,
    pub radius: f64,
}

impl Disc {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        let dy = row as f64 + 0.5 - self.center_row;
        let dx = col as f64 + 0.5 - self.center_col;
        dy * dy + dx * dx <= self.radius * self.radius
    }
}

/// A generated background and its anatomy mask (1.0 on vessels for fundus,
/// on brain tissue for MRI; 0.0 elsewhere).
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    pub image: Image,
    pub mask: Image,
    pub disc: Disc,
}

pub fn gen_background(domain: Domain, height: usize, width: usize, seed: u64) -> Result<Background> {
    match domain {
        Domain::Fundus => fundus(height, width, seed),
        Domain::Mri => mri(height, width, seed),
    }
}

fn fundus(height: usize, width: usize, seed: u64) -> Result<Background> {
    let mut rng = rng::stream(seed, &[0]);
    let size = height.min(width) as f64;
    let disc = Disc {
        center_row: height as f64 / 2.0 + rng.gen_range(-1.5..1.5),
        center_col: width as f64 / 2.0 + rng.gen_range(-1.5..1.5),
        radius: size * rng.gen_range(0.44..0.48),
    };
    let base = [
        0.78 + rng.gen_range(-0.05..0.05),
        0.36 + rng.gen_range(-0.04..0.04),
        0.16 + rng.gen_range(-0.03..0.03),
    ];
    let od_angle = rng.gen_range(0.0..TAU);
    let od_dist = disc.radius * rng.gen_range(0.35..0.5);
    let od = (
        disc.center_row + od_dist * od_angle.sin(),
        disc.center_col + od_dist * od_angle.cos(),
    );
    let od_radius = disc.radius * rng.gen_range(0.11..0.14);

    let mut img = Image::filled(height, width, 3, 0.0)?;
    for r in 0..height {
        for c in 0..width {
            if !disc.contains(r, c) {
                continue;
            }
            let dy = r as f64 + 0.5 - disc.center_row;
            let dx = c as f64 + 0.5 - disc.center_col;
            let shade = 1.0 - 0.35 * (dy * dy + dx * dx) / (disc.radius * disc.radius);
            let oy = r as f64 + 0.5 - od.0;
            let ox = c as f64 + 0.5 - od.1;
            let glow = (-(oy * oy + ox * ox) / (2.0 * od_radius * od_radius)).exp();
            let optic = [0.98, 0.86, 0.58];
            for ch in 0..3 {
                let v = base[ch] * shade * (1.0 - glow) + optic[ch] * glow + rng.gen_range(-0.015..0.015);
                img.set(r, c, ch, v as f32);
            }
        }
    }

    let mut mask = Image::filled(height, width, 1, 0.0)?;
    let vessel_color = [0.55, 0.14, 0.08];
    let inner = Disc {
        radius: disc.radius - 1.5,
        ..disc
    };
    let n_vessels = rng.gen_range(4..=6);
    for v in 0..n_vessels {
        let mut heading = od_angle + PI + (v as f64 / n_vessels as f64 - 0.5) * 2.6 + rng.gen_range(-0.3..0.3);
        let mut pos = od;
        let mut turn = rng.gen_range(-0.06..0.06);
        let mut thickness: f64 = rng.gen_range(1.0..1.5);
        for _ in 0..(disc.radius * 2.2) as usize {
            pos.0 += heading.sin();
            pos.1 += heading.cos();
            heading += turn;
            turn = (turn + rng.gen_range(-0.02..0.02)).clamp(-0.08, 0.08);
            thickness = (thickness * 0.995).max(0.6);
            let reach = thickness.ceil() as isize;
            let (pr, pc) = (pos.0.floor() as isize, pos.1.floor() as isize);
            for dr in -reach..=reach {
                for dc in -reach..=reach {
                    let (rr, cc) = (pr + dr, pc + dc);
                    if rr < 0 || cc < 0 || rr as usize >= height || cc as usize >= width {
                        continue;
                    }
                    let (rr, cc) = (rr as usize, cc as usize);
                    let dy = rr as f64 + 0.5 - pos.0;
                    let dx = cc as f64 + 0.5 - pos.1;
                    if dy * dy + dx * dx > thickness * thickness || !inner.contains(rr, cc) {
                        continue;
                    }
                    for ch in 0..3 {
                        let x = img.get(rr, cc, ch) as f64;
                        img.set(rr, cc, ch, (x + 0.8 * (vessel_color[ch] - x)) as f32);
                    }
                    mask.set(rr, cc, 0, 1.0);
                }
            }
            let dy = pos.0 - disc.center_row;
            let dx = pos.1 - disc.center_col;
            if (dy * dy + dx * dx).sqrt() > inner.radius {
                break;
            }
        }
    }
    Ok(Background {
        image: img,
        mask,
        disc,
    })
}

fn mri(height: usize, width: usize, seed: u64) -> Result<Background> {
    let mut rng = rng::stream(seed, &[0]);
    let cy = height as f64 / 2.0 + rng.gen_range(-1.5..1.5);
    let cx = width as f64 / 2.0 + rng.gen_range(-1.5..1.5);
    let ry = height as f64 * rng.gen_range(0.40..0.44);
    let rx = width as f64 * rng.gen_range(0.33..0.37);
    let tissue = rng.gen_range(0.38..0.46);
    let (fy, fx, phase) = (rng.gen_range(0.15..0.3), rng.gen_range(0.15..0.3), rng.gen_range(0.0..TAU));
    let vent = (rng.gen_range(0.15..0.22), rng.gen_range(0.06..0.09));

    let mut img = Image::filled(height, width, 1, 0.0)?;
    let mut mask = Image::filled(height, width, 1, 0.0)?;
    for r in 0..height {
        for c in 0..width {
            let y = r as f64 + 0.5 - cy;
            let x = c as f64 + 0.5 - cx;
            let e = (y / ry).powi(2) + (x / rx).powi(2);
            let skull_e = (y / (ry + 2.0)).powi(2) + (x / (rx + 2.0)).powi(2);
            let v = if e <= 1.0 {
                mask.set(r, c, 0, 1.0);
                let texture = 0.04 * (fy * y + phase).sin() * (fx * x - phase).cos();
                let ventricle = [-1.0, 1.0].iter().any(|side| {
                    let vy = y / (ry * vent.0);
                    let vx = (x - side * rx * 0.18) / (rx * vent.1);
                    vy * vy + vx * vx <= 1.0
                });
                let base = if ventricle { 0.14 } else { tissue + 0.08 * (1.0 - e) };
                base + texture + rng.gen_range(-0.02..0.02)
            } else if skull_e <= 1.0 {
                0.75 + rng.gen_range(-0.05..0.05)
            } else {
                rng.gen_range(0.0..0.02)
            };
            img.set(r, c, 0, v as f32);
        }
    }
    Ok(Background {
        image: img,
        mask,
        disc: Disc {
            center_row: cy,
            center_col: cx,
            radius: ry.max(rx),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fundus_is_rgb_and_mri_gray() {
        let f = gen_background(Domain::Fundus, 64, 64, 1).unwrap();
        assert_eq!(f.image.channels(), 3);
        assert_eq!(f.mask.channels(), 1);
        let m = gen_background(Domain::Mri, 64, 64, 1).unwrap();
        assert_eq!(m.image.channels(), 1);
        assert!(m.mask.pixels().iter().any(|&v| v == 1.0));
    }

    #[test]
    fn fundus_has_vessels() {
        for seed in 0..10 {
            let f = gen_background(Domain::Fundus, 64, 64, seed).unwrap();
            let n = f.mask.pixels().iter().filter(|&&v| v > 0.5).count();
            assert!(n > 40, "seed {seed}: only {n} vessel pixels");
        }
    }
}
