//! Saves a classifier checkpoint, reloads it, and confirms the outputs are
//! bit-identical.

use acav::imaging::Image;
use acav::nn::{load_checkpoint, save_checkpoint, Checkpoint, Model, TrainingMetadata};

fn main() -> acav::Result<()> {
    let model = Model::classifier(3, 64, 64, 1)?;
    let ck = Checkpoint::new(model, TrainingMetadata { seed: 1, ..Default::default() })?;
    let path = std::env::temp_dir().join("acav_example.acav");
    save_checkpoint(&ck, &path)?;
    let back = load_checkpoint(&path)?;
    println!(
        "{}: {} parameters, penultimate width {}",
        path.display(),
        back.model.parameter_count(),
        back.penultimate_width
    );

    let x = Image::filled(64, 64, 3, 0.3)?.to_tensor();
    let (a, b) = (ck.model.forward(&x)?, back.model.forward(&x)?);
    let same = a.data().iter().zip(b.data()).all(|(u, v)| u.to_bits() == v.to_bits());
    println!("outputs {:?} / {:?}, bit-identical: {same}", a.data(), b.data());
    std::fs::remove_file(&path).ok();
    Ok(())
}
