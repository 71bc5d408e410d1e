//! Tumor size sweep on synthetic MRI: the mean augmented activation should
//! swing toward the diseased reference as the tumor grows.
//!
//!     cargo run --release --example tumor_scale -- [seed]

use acav::nn::{train, Model, TrainConfig};
use acav::probe::{run_concept_experiment, ConceptConfig, ExperimentOptions, References, DEFAULT_MARGIN};
use acav::synth::{gen_dataset, ConceptKind, DatasetSpec, Domain, Label, ScaleClass};

fn main() -> acav::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let spec = DatasetSpec::new(Domain::Mri, 100, 100, seed)
        .with_frequency(ConceptKind::Tumor, 1.0)
        .with_scale_mix([0.1, 0.2, 0.7]);
    let data = gen_dataset(&spec)?;
    let (x, y) = data.training_set();
    let cfg = TrainConfig { learning_rate: 0.03, epochs: 30, batch_size: 8, master_seed: seed };
    let model = train(Model::classifier(1, 64, 64, seed)?, &x, &y, &cfg)?.model;

    let layers = [model.penultimate_index()];
    let labels: Vec<Label> = data.samples.iter().map(|s| s.label).collect();
    let refs = References::compute(&model, &x, &labels, &layers, DEFAULT_MARGIN)?;
    let pool = gen_dataset(&DatasetSpec { seed: seed + 10_000, healthy: 50, diseased: 0, ..spec.clone() })?;
    let configs: Vec<_> = ScaleClass::ALL
        .iter()
        .map(|&s| ConceptConfig::new(&[ConceptKind::Tumor], 1, s))
        .collect();
    let options = ExperimentOptions { seed, margin: DEFAULT_MARGIN, domain: Domain::Mri, entropy: data.entropy() };
    let report = run_concept_experiment(&model, &refs, &pool.samples, &configs, &layers, &options)?;

    println!("{:<8} {:>18} {:>10}", "scale", "angle to diseased", "flip rate");
    for r in &report.rows {
        println!("{:<8} {:>17.1}° {:>10.2}", r.scale.to_string(), r.angle_diseased, r.flip_rate);
    }
    Ok(())
}
