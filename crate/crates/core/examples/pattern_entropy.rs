//! Pattern entropy of a few class mixes, and of an actual generated dataset
//! whose frequency table has proportions 0.7 / 0.2 / 0.1.

use acav::probe::pattern_entropy;
use acav::synth::{gen_dataset, ConceptKind, DatasetSpec, Domain};

fn main() -> acav::Result<()> {
    for p in [vec![1.0], vec![0.5, 0.5], vec![0.7, 0.2, 0.1], vec![0.25; 4]] {
        println!("{p:?}: H = {:.6} nats", pattern_entropy(&p)?);
    }

    let spec = DatasetSpec::new(Domain::Fundus, 0, 200, 3)
        .with_frequency(ConceptKind::Bleeding, 2.1)
        .with_frequency(ConceptKind::FattyDots, 0.6)
        .with_frequency(ConceptKind::CottonWool, 0.3);
    let ds = gen_dataset(&spec)?;
    println!("generated proportions {:?}", ds.proportions());
    println!("generated H = {:.4} nats (expected 0.8018)", ds.entropy());
    Ok(())
}
