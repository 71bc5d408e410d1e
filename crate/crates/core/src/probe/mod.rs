//! Concept probing: confidence-gated decisions, class reference vectors,
//! activation deviation metrics and augmentation sweeps.

pub mod classify;
pub mod experiment;
pub mod metrics;
pub mod reference;
pub mod report;

pub use crate::nn::ActivationVector;
pub use classify::{classify_confident, Decision, DEFAULT_MARGIN};
pub use experiment::{
    augment, layer_depth, run_concept_experiment, AugmentedPair, ConceptConfig, ExperimentOptions,
    References,
};
pub use metrics::{
    cosine_angle, delta_v, norm, pattern_entropy, similarity_deviation, CosineAngle, FlipMetrics,
    SimilarityDeviation,
};
pub use reference::{probe, probe_all, reference_from_probes, reference_vector, reference_vectors, Probed, ReferenceVector};
pub use report::{read_report_csv, records_to_csv, AcavReport, CsvRecord, ReportFooter, ReportRow};
