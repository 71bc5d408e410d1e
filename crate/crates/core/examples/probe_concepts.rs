//! Single versus multiple patterns: trains a fundus classifier, then adds 1
//! or 3 patterns of each kind (and all kinds together) to held-out healthy
//! images and prints the deviation table.
//!
//!     cargo run --release --example probe_concepts -- [seed]

use acav::nn::{train, Model, TrainConfig};
use acav::probe::{run_concept_experiment, ConceptConfig, ExperimentOptions, References, DEFAULT_MARGIN};
use acav::synth::{gen_dataset, ConceptKind, DatasetSpec, Domain, Label, ScaleClass};

fn main() -> acav::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let spec = DatasetSpec::new(Domain::Fundus, 150, 150, seed)
        .with_frequency(ConceptKind::Bleeding, 1.2)
        .with_frequency(ConceptKind::FattyDots, 0.8)
        .with_frequency(ConceptKind::CottonWool, 0.6);
    let data = gen_dataset(&spec)?;
    let (x, y) = data.training_set();
    let cfg = TrainConfig { learning_rate: 0.04, epochs: 30, batch_size: 8, master_seed: seed };
    let model = train(Model::classifier(3, 64, 64, seed)?, &x, &y, &cfg)?.model;

    let layers = [model.penultimate_index(), model.probe_layer(2)?];
    let labels: Vec<Label> = data.samples.iter().map(|s| s.label).collect();
    let refs = References::compute(&model, &x, &labels, &layers, DEFAULT_MARGIN)?;
    println!("references from {} healthy and {} diseased images", refs.healthy[0].count, refs.diseased[0].count);

    let pool = gen_dataset(&DatasetSpec { seed: seed + 10_000, healthy: 50, diseased: 0, ..spec.clone() })?;
    let mut configs = Vec::new();
    for kind in ConceptKind::FUNDUS {
        for count in [1, 3] {
            configs.push(ConceptConfig::new(&[kind], count, ScaleClass::Medium));
        }
    }
    configs.push(ConceptConfig::new(&ConceptKind::FUNDUS, 3, ScaleClass::Medium).with_label("all kinds"));
    let options = ExperimentOptions { seed, margin: DEFAULT_MARGIN, domain: Domain::Fundus, entropy: data.entropy() };
    let report = run_concept_experiment(&model, &refs, &pool.samples, &configs, &layers, &options)?;
    print!("{}", report.to_markdown());
    Ok(())
}
