//! Deterministic synthetic datasets standing in for fundus photographs and
//! brain MRI slices, with controllable pattern frequencies.

pub mod background;
pub mod dataset;
pub mod pattern;

pub use background::{gen_background, Background, Disc, Domain};
pub use dataset::{
    gen_dataset, load_dataset, read_manifest, write_dataset, DatasetSpec, Label, LabeledDataset,
    Manifest, PatternInstance, Sample,
};
pub use pattern::{gen_pattern, ConceptKind, ScaleClass};
