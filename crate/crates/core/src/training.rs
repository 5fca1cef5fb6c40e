//! The optimization loop: softmax cross-entropy, bias-corrected Adam,
//! seeded batch iteration, validation-loss early stopping and
//! checkpointing.

mod adam;
mod data;
mod early_stopping;
mod log;
mod loss;
mod trainer;

pub use adam::{adam_update, AdamOptimizer};
pub use data::{load_frame_set, FrameSet, StoredFrame};
pub use early_stopping::{EarlyStopping, StopDecision};
pub use log::{EpochStats, TrainingLog};
pub use loss::compute_loss;
pub use trainer::{train, TrainOutcome};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("logits/labels mismatch: {0}")]
    LabelMismatch(String),
    #[error("non-finite gradient in {0}; step aborted")]
    NonFiniteGradient(String),
    #[error("non-finite loss at epoch {epoch} step {step}")]
    NonFiniteLoss {
        epoch: u32,
        step: u32,
        /// State snapshot taken when the abort fired.
        diagnostic_checkpoint: Vec<u8>,
    },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Media(#[from] crate::media::MediaError),
}

pub type Result<T> = std::result::Result<T, TrainError>;

/// Optimizer and loop hyperparameters. Defaults follow the training
/// recipe: Adam(1e-4, 0.9, 0.999, 1e-8), batch 8, patience 10.
/// `max_epochs` has no principled default and must be chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub patience: u32,
    pub max_epochs: u32,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(max_epochs: u32) -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 8,
            patience: 10,
            max_epochs,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(TrainError::InvalidConfig(msg));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return fail(format!("{name} must lie in [0, 1), got {beta}"));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.patience == 0 {
            return fail("patience must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return fail("max_epochs must be at least 1".into());
        }
        Ok(())
    }
}
