//! Seeded anchor sampling near a structure mask (blood vessels, brain tissue).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::compose::Placement;
use super::image::Image;
use crate::error::{AcavError, Result};

/// Pixels within this Euclidean distance of the mask count as "close to" it.
pub const DEFAULT_DILATION_RADIUS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementSampler {
    pub dilation_radius: usize,
    /// Size of the patch that will be placed. Sampled points are patch
    /// centres; only centres whose whole footprint fits in the image are
    /// eligible, and the returned anchors are the footprint's top-left corner.
    pub footprint: (usize, usize),
}

impl Default for PlacementSampler {
    fn default() -> Self {
        Self {
            dilation_radius: DEFAULT_DILATION_RADIUS,
            footprint: (1, 1),
        }
    }
}

impl PlacementSampler {
    pub fn new(dilation_radius: usize, footprint: (usize, usize)) -> Self {
        Self {
            dilation_radius,
            footprint,
        }
    }

    /// Eligible patch centres in raster order.
    pub fn candidates(&self, mask: &Image) -> Result<Vec<(usize, usize)>> {
        if mask.channels() != 1 {
            return Err(AcavError::Placement(format!(
                "placement mask must be single-channel, got {} channels",
                mask.channels()
            )));
        }
        let (fh, fw) = self.footprint;
        if fh == 0 || fw == 0 || fh > mask.height() || fw > mask.width() {
            return Err(AcavError::Placement(format!(
                "footprint {fh}x{fw} does not fit a {}x{} mask",
                mask.height(),
                mask.width()
            )));
        }
        let support = dilate(mask, self.dilation_radius);
        let (top, left) = (fh / 2, fw / 2);
        let rows = top..=mask.height() - (fh - top);
        let cols = left..=mask.width() - (fw - left);
        Ok(rows
            .flat_map(|r| cols.clone().map(move |c| (r, c)))
            .filter(|&(r, c)| support[r * mask.width() + c])
            .collect())
    }

    /// Draws `count` centres without replacement, pairwise at least
    /// `min_distance` apart, and at least `min_distance` from every point in
    /// `avoid`. Candidates are visited in a seeded random order and accepted
    /// greedily.
    pub fn sample_avoiding(
        &self,
        mask: &Image,
        count: usize,
        min_distance: f64,
        seed: u64,
        avoid: &[(usize, usize)],
    ) -> Result<Vec<Placement>> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let mut candidates = self.candidates(mask)?;
        candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let min_sq = min_distance * min_distance;
        let far = |a: (usize, usize), b: &(usize, usize)| {
            let dr = a.0 as f64 - b.0 as f64;
            let dc = a.1 as f64 - b.1 as f64;
            dr * dr + dc * dc >= min_sq
        };
        let mut chosen: Vec<(usize, usize)> = Vec::with_capacity(count);
        for cand in candidates {
            if avoid.iter().all(|p| far(cand, p)) && chosen.iter().all(|p| far(cand, p)) {
                chosen.push(cand);
                if chosen.len() == count {
                    break;
                }
            }
        }
        if chosen.len() < count {
            return Err(AcavError::PlacementInfeasible {
                requested: count,
                achievable: chosen.len(),
            });
        }
        let (top, left) = (self.footprint.0 / 2, self.footprint.1 / 2);
        Ok(chosen
            .into_iter()
            .map(|(r, c)| Placement::at(r - top, c - left))
            .collect())
    }

    pub fn sample(&self, mask: &Image, count: usize, min_distance: f64, seed: u64) -> Result<Vec<Placement>> {
        self.sample_avoiding(mask, count, min_distance, seed, &[])
    }
}

/// Samples `count` anchors near the mask with the default dilation radius.
pub fn sample_placements(
    mask: &Image,
    count: usize,
    min_distance: f64,
    seed: u64,
) -> Result<Vec<Placement>> {
    PlacementSampler::default().sample(mask, count, min_distance, seed)
}

/// Pixels within Euclidean distance `radius` of a mask pixel above 0.5.
pub fn dilate(mask: &Image, radius: usize) -> Vec<bool> {
    let (h, w) = (mask.height(), mask.width());
    let mut out = vec![false; h * w];
    let r = radius as isize;
    let offsets: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dy, dx)))
        .filter(|(dy, dx)| dy * dy + dx * dx <= r * r)
        .collect();
    for y in 0..h {
        for x in 0..w {
            if mask.get(y, x, 0) <= 0.5 {
                continue;
            }
            for &(dy, dx) in &offsets {
                let (ny, nx) = (y as isize + dy, x as isize + dx);
                if ny >= 0 && nx >= 0 && (ny as usize) < h && (nx as usize) < w {
                    out[ny as usize * w + nx as usize] = true;
                }
            }
        }
    }
    out
}
