use acav::imaging::netpbm::{decode, encode};
use acav::imaging::placement::dilate;
use acav::imaging::{
    compose, compose_with_footprint, load_image, load_patch, sample_placements, save_image,
    save_patch, scale_patch, AlphaPatch, Image, Placement, PlacementSampler,
};
use acav::synth::{gen_background, Domain};
use acav::AcavError;
use proptest::prelude::*;

fn image_strategy(max: usize) -> impl Strategy<Value = Image> {
    (1..=max, 1..=max, prop_oneof![Just(1usize), Just(3usize)]).prop_flat_map(|(h, w, c)| {
        prop::collection::vec(0.0f32..=1.0, h * w * c)
            .prop_map(move |px| Image::new(h, w, c, px).unwrap())
    })
}

fn patch_strategy(max: usize, channels: usize) -> impl Strategy<Value = AlphaPatch> {
    (1..=max, 1..=max).prop_flat_map(move |(h, w)| {
        (
            prop::collection::vec(0.0f32..=1.0, h * w * channels),
            prop::collection::vec(0.0f32..=1.0, h * w),
        )
            .prop_map(move |(px, a)| {
                AlphaPatch::new(Image::new(h, w, channels, px).unwrap(), a, "test").unwrap()
            })
    })
}

fn constant_patch(side: usize, value: f32, alpha: f32) -> AlphaPatch {
    AlphaPatch::new(
        Image::filled(side, side, 1, value).unwrap(),
        vec![alpha; side * side],
        "flat",
    )
    .unwrap()
}

#[test]
fn zero_intensity_is_identity() {
    let img = Image::filled(8, 8, 3, 0.3).unwrap();
    let out = compose(&img, &constant_patch(4, 0.9, 1.0), &Placement::at(2, 2).with_intensity(0.0)).unwrap();
    assert_eq!(out, img);
}

#[test]
fn opaque_paste_copies_pattern() {
    let img = Image::filled(8, 8, 1, 0.1).unwrap();
    let (out, fp) = compose_with_footprint(&img, &constant_patch(3, 0.7, 1.0), &Placement::at(1, 4)).unwrap();
    for r in 0..8 {
        for c in 0..8 {
            let want = if fp.contains(r, c) { 0.7 } else { 0.1 };
            assert_eq!(out.get(r, c, 0), want);
        }
    }
}

#[test]
fn half_alpha_blends_to_midpoint() {
    let img = Image::filled(4, 4, 1, 0.2).unwrap();
    let out = compose(&img, &constant_patch(2, 0.8, 0.5), &Placement::at(0, 0)).unwrap();
    assert!((out.get(0, 0, 0) - 0.5).abs() < 1e-6);
}

#[test]
fn patch_outside_image_is_a_placement_error() {
    let img = Image::filled(4, 4, 1, 0.2).unwrap();
    let r = compose(&img, &constant_patch(3, 0.8, 1.0), &Placement::at(2, 2));
    assert!(matches!(r, Err(AcavError::Placement(_))));
}

#[test]
fn scale_changes_dimensions() {
    let p = constant_patch(5, 0.4, 0.6);
    let same = scale_patch(&p, 1.0).unwrap();
    assert_eq!((same.height(), same.width()), (5, 5));
    let double = scale_patch(&p, 2.0).unwrap();
    assert_eq!((double.height(), double.width()), (10, 10));
    assert!(scale_patch(&p, 0.0).is_err());
}

#[test]
fn scaled_constant_patch_stays_constant() {
    let p = constant_patch(6, 0.37, 0.81);
    let s = scale_patch(&p, 1.7).unwrap();
    assert_eq!(s.height(), 10);
    assert!(s.pattern.pixels().iter().all(|&v| v == 0.37));
    assert!(s.alpha.iter().all(|&a| a == 0.81));
}

#[test]
fn p5_single_white_pixel() {
    let img = decode(b"P5\n1 1\n255\n\xff").unwrap();
    assert_eq!(img, Image::new(1, 1, 1, vec![1.0]).unwrap());
}

#[test]
fn truncated_p6_is_rejected() {
    let r = decode(b"P6\n4 4\n255\n\x00\x01\x02");
    assert!(matches!(r, Err(AcavError::Format(m)) if m.contains("truncated")));
}

#[test]
fn header_comments_are_skipped() {
    let img = decode(b"P5\n# made by hand\n2 1\n# max\n255\n\x00\xff").unwrap();
    assert_eq!(img.pixels(), &[0.0, 1.0]);
}

#[test]
fn patch_library_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = constant_patch(4, 0.6, 0.5);
    p.intensity = 0.75;
    let sidecar = save_patch(&p, dir.path(), "dot").unwrap();
    let back = load_patch(&sidecar).unwrap();
    assert_eq!(back.kind, "flat");
    assert_eq!(back.intensity, 0.75);
    assert_eq!((back.height(), back.width()), (4, 4));
    assert!(back.alpha.iter().all(|&a| (a - 0.5).abs() <= 1.0 / 255.0));
}

#[test]
fn zero_count_gives_no_anchors() {
    let mask = Image::filled(8, 8, 1, 1.0).unwrap();
    assert!(sample_placements(&mask, 0, 0.0, 1).unwrap().is_empty());
}

#[test]
fn single_eligible_pixel_is_chosen() {
    let mut mask = Image::filled(9, 9, 1, 0.0).unwrap();
    mask.set(6, 2, 0, 1.0);
    let s = PlacementSampler::new(0, (1, 1));
    for seed in 0..5 {
        let p = s.sample(&mask, 1, 0.0, seed).unwrap();
        assert_eq!((p[0].row, p[0].col), (6, 2));
    }
    assert!(matches!(
        s.sample(&mask, 2, 0.0, 0),
        Err(AcavError::PlacementInfeasible { requested: 2, achievable: 1 })
    ));
}

#[test]
fn vessel_anchors_stay_near_vessels_and_apart() {
    for seed in 0..10 {
        let bg = gen_background(Domain::Fundus, 64, 64, seed).unwrap();
        let support = dilate(&bg.mask, 5);
        let anchors = sample_placements(&bg.mask, 5, 6.0, seed).unwrap();
        assert_eq!(anchors.len(), 5);
        for (i, a) in anchors.iter().enumerate() {
            assert!(support[a.row * 64 + a.col]);
            for b in &anchors[i + 1..] {
                let d = ((a.row as f64 - b.row as f64).powi(2) + (a.col as f64 - b.col as f64).powi(2)).sqrt();
                assert!(d >= 6.0, "{d}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn compose_only_touches_the_footprint(
        img in image_strategy(12),
        patch in patch_strategy(6, 1),
        r in 0usize..12, c in 0usize..12,
        intensity in 0.0f32..2.0,
    ) {
        prop_assume!(r + patch.height() <= img.height() && c + patch.width() <= img.width());
        let place = Placement::at(r, c).with_intensity(intensity);
        let (out, fp) = compose_with_footprint(&img, &patch, &place).unwrap();
        prop_assert_eq!(out.height(), img.height());
        prop_assert_eq!(out.channels(), img.channels());
        for row in 0..img.height() {
            for col in 0..img.width() {
                for ch in 0..img.channels() {
                    let v = out.get(row, col, ch);
                    prop_assert!((0.0..=1.0).contains(&v));
                    if !fp.contains(row, col) {
                        prop_assert_eq!(v, img.get(row, col, ch));
                    }
                }
            }
        }
    }

    #[test]
    fn blend_moves_pixels_toward_pattern_monotonically(
        base in 0.0f32..=1.0, target in 0.0f32..=1.0, lo in 0.0f32..=1.0, hi in 0.0f32..=1.0,
    ) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let img = Image::filled(3, 3, 1, base).unwrap();
        let p = constant_patch(3, target, 1.0);
        let a = compose(&img, &p, &Placement::at(0, 0).with_intensity(lo)).unwrap().get(1, 1, 0);
        let b = compose(&img, &p, &Placement::at(0, 0).with_intensity(hi)).unwrap().get(1, 1, 0);
        prop_assert!((b - target).abs() <= (a - target).abs() + 1e-6);
    }

    #[test]
    fn scaling_keeps_values_in_range(patch in patch_strategy(6, 3), factor in 0.5f32..3.0) {
        if let Ok(s) = scale_patch(&patch, factor) {
            prop_assert!(s.validate().is_ok());
            prop_assert_eq!(s.height(), (patch.height() as f64 * factor as f64).round() as usize);
        }
    }

    #[test]
    fn netpbm_round_trip_is_within_one_step(img in image_strategy(10)) {
        let back = decode(&encode(&img, &["seed 1"])).unwrap();
        prop_assert_eq!((back.height(), back.width(), back.channels()),
                        (img.height(), img.width(), img.channels()));
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            prop_assert!((a - b).abs() <= 1.0 / 255.0 + 1e-7);
        }
    }
}

#[test]
fn netpbm_files_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let bg = gen_background(Domain::Fundus, 32, 32, 3).unwrap();
    let path = dir.path().join("bg.ppm");
    save_image(&bg.image, &path).unwrap();
    let back = load_image(&path).unwrap();
    let worst = bg.image.pixels().iter().zip(back.pixels()).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max);
    assert!(worst <= 1.0 / 255.0 + 1e-7);
}
