//! Trains the classifier on synthetic fundus images and reports confident
//! accuracy on a held-out set. Takes about a minute in release mode.
//!
//!     cargo run --release --example train_classifier -- [checkpoint_path]

use acav::nn::{save_checkpoint, train, Checkpoint, Model, TrainConfig, TrainingMetadata};
use acav::probe::{probe_all, DEFAULT_MARGIN};
use acav::synth::{gen_dataset, ConceptKind, DatasetSpec, Domain};

fn main() -> acav::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "fundus.acav".into());
    let seed = 1;
    let spec = DatasetSpec::new(Domain::Fundus, 150, 150, seed)
        .with_frequency(ConceptKind::Bleeding, 1.2)
        .with_frequency(ConceptKind::FattyDots, 0.8)
        .with_frequency(ConceptKind::CottonWool, 0.6);
    let (x, y) = gen_dataset(&spec)?.training_set();

    let cfg = TrainConfig { learning_rate: 0.04, epochs: 30, batch_size: 8, master_seed: seed };
    let out = train(Model::classifier(3, 64, 64, seed)?, &x, &y, &cfg)?;
    for (i, loss) in out.history.iter().enumerate().step_by(5) {
        println!("epoch {:>2}  loss {loss:.4}", i + 1);
    }

    let test = gen_dataset(&DatasetSpec { seed: 999, healthy: 100, diseased: 100, ..spec })?;
    let (tx, ty) = test.training_set();
    let probed = probe_all(&out.model, &tx, &[out.model.penultimate_index()], DEFAULT_MARGIN)?;
    let correct = probed
        .iter()
        .zip(&ty)
        .filter(|(p, &label)| p.decision.label().map(|l| l.index()) == Some(label))
        .count();
    let abstained = probed.iter().filter(|p| p.decision.label().is_none()).count();
    println!("held-out: {correct}/{} confidently correct, {abstained} abstained", ty.len());

    let meta = TrainingMetadata {
        seed,
        epochs: cfg.epochs as u32,
        final_loss: out.history.last().copied(),
        config_hash: None,
    };
    save_checkpoint(&Checkpoint::new(out.model, meta)?, path.as_ref())?;
    println!("saved {path}");
    Ok(())
}
