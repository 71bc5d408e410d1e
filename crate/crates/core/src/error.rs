use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AcavError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AcavError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("input shape mismatch: model expects {expected:?}, got {actual:?}")]
    InputShape {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("probe error: layer {index} out of range (model has {layers} layers)")]
    Probe { index: usize, layers: usize },

    #[error("invalid model: {0}")]
    Model(String),

    #[error("non-finite value produced at layer {layer} ({kind})")]
    NonFinite { layer: usize, kind: &'static str },

    #[error("training diverged at epoch {epoch}: mean loss {loss}")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("invalid training configuration: {0}")]
    TrainConfig(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported checkpoint version {found} (this build reads version {supported})")]
    Version { found: u32, supported: u32 },

    #[error("placement error: {0}")]
    Placement(String),

    #[error("placement infeasible: requested {requested} anchors, only {achievable} achievable")]
    PlacementInfeasible { requested: usize, achievable: usize },

    #[error("scale error: {0}")]
    Scale(String),

    #[error("dataset generation failed: {0}")]
    Generation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("angle undefined for a zero vector")]
    UndefinedAngle,

    #[error("no qualifying samples for the {class} reference at layer {layer}: none were classified correctly with confidence")]
    EmptyReference { class: &'static str, layer: usize },

    #[error("no decision: every original sample abstained, so flips cannot be measured")]
    NoDecision,

    #[error("proportions are not normalized: sum is {sum}")]
    Normalization { sum: f64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("merge error: {0}")]
    Merge(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl AcavError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AcavError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        AcavError::Json {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input (bad paths, configs, files) rather
    /// than by the toolkit itself. Drives the CLI exit code.
    pub fn is_user_error(&self) -> bool {
        match self {
            AcavError::Io { source, .. } => matches!(
                source.kind(),
                std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied
            ),
            AcavError::Config(_)
            | AcavError::Json { .. }
            | AcavError::Format(_)
            | AcavError::Version { .. }
            | AcavError::Merge(_)
            | AcavError::TrainConfig(_)
            | AcavError::EmptyReference { .. }
            | AcavError::NoDecision => true,
            _ => false,
        }
    }
}
