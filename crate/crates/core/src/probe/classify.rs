use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::Model;
use crate::synth::Label;
use crate::tensor::Tensor;

/// Confidence band used throughout: healthy above 0.6, diseased below 0.4.
pub const DEFAULT_MARGIN: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Healthy,
    Diseased,
    Abstain,
}

impl Decision {
    /// Healthy when `p_healthy > 0.5 + margin / 2`, diseased when
    /// `p_healthy < 0.5 - margin / 2`, abstain in between.
    pub fn from_probability(p_healthy: f64, margin: f64) -> Self {
        let half = margin / 2.0;
        if p_healthy > 0.5 + half {
            Decision::Healthy
        } else if p_healthy < 0.5 - half {
            Decision::Diseased
        } else {
            Decision::Abstain
        }
    }

    pub fn label(self) -> Option<Label> {
        match self {
            Decision::Healthy => Some(Label::Healthy),
            Decision::Diseased => Some(Label::Diseased),
            Decision::Abstain => None,
        }
    }
}

pub fn classify_confident(model: &Model<f32>, input: &Tensor<f32>, margin: f64) -> Result<Decision> {
    debug_assert!((0.0..0.5).contains(&margin));
    Ok(Decision::from_probability(model.healthy_probability(input)?, margin))
}
