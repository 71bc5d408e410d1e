//! Pastes each fundus concept pattern onto one background near the vessels
//! and saves the before/after images.
//!
//!     cargo run --release --example compose_patterns -- [out_dir]

use std::path::PathBuf;

use acav::imaging::{compose_with_footprint, save_image, PlacementSampler};
use acav::synth::{gen_background, gen_pattern, ConceptKind, Domain, ScaleClass};

fn main() -> acav::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "acav_compose".into()).into();
    std::fs::create_dir_all(&out).map_err(|e| acav::AcavError::io(&out, e))?;

    let bg = gen_background(Domain::Fundus, 64, 64, 7)?;
    save_image(&bg.image, &out.join("background.ppm"))?;
    save_image(&bg.mask, &out.join("vessels.pgm"))?;

    let mut image = bg.image.clone();
    for (i, kind) in ConceptKind::FUNDUS.into_iter().enumerate() {
        let patch = gen_pattern(kind, i as u64, ScaleClass::Large)?;
        let sampler = PlacementSampler::new(Domain::Fundus.placement_radius(), (patch.height(), patch.width()));
        let place = sampler.sample(&bg.mask, 1, 0.0, 100 + i as u64)?[0];
        let (next, fp) = compose_with_footprint(&image, &patch, &place)?;
        println!("{kind:<12} {}x{} at ({}, {})", fp.height, fp.width, fp.row, fp.col);
        image = next;
    }
    save_image(&image, &out.join("augmented.ppm"))?;
    println!("images in {}", out.display());
    Ok(())
}
