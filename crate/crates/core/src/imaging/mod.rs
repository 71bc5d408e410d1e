//! Raster images, PGM/PPM IO, and concept-patch composition.

pub mod compose;
pub mod image;
pub mod library;
pub mod netpbm;
pub mod placement;

pub use compose::{compose, compose_with_footprint, scale_patch, AlphaPatch, Footprint, Placement};
pub use image::{Image, INPUT_OFFSET, INPUT_SCALE};
pub use library::{load_patch, save_patch, PatchSidecar};
pub use netpbm::{load_image, save_image};
pub use placement::{sample_placements, PlacementSampler, DEFAULT_DILATION_RADIUS};
