pub mod cli;
pub mod error;
pub mod imaging;
pub mod nn;
pub mod probe;
pub mod rng;
pub mod selftest;
pub mod synth;
pub mod tensor;

pub use error::{AcavError, Result};
pub use tensor::{Real, Tensor};
