//! Convolutional classifier engine: layers, exact backpropagation, seeded
//! mini-batch training and a binary checkpoint format.

pub mod checkpoint;
pub mod conv;
pub mod layer;
pub mod model;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, TrainingMetadata};
pub use layer::{Layer, LayerSpec};
pub use model::{
    classifier_specs, ActivationVector, Gradients, Model, NUM_CLASSES, PENULTIMATE_WIDTH,
};
pub use train::{train, TrainConfig, TrainOutcome};
