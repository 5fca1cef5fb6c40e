//! The per-frame classifier: a scalable Xception-style backbone
//! (depthwise-separable convolutions organized into residual modules)
//! under a two-output fully-connected head.
//!
//! At the default configuration the feature extractor holds 36
//! convolutional layers in 14 modules; residual connections are present
//! on every module except the first and last. `width_multiplier` and
//! `middle_module_count` scale the topology down far enough to train on
//! a CPU while preserving the structure.

mod checkpoint;
mod descriptor;
pub(crate) mod layers;
mod network;

pub use checkpoint::{
    load_network, load_network_bytes, save_network, save_network_bytes, CheckpointMeta,
    CHECKPOINT_SCHEMA_VERSION,
};
pub use descriptor::{ArchitectureDescriptor, ModuleDescriptor, ResidualKind};
pub use layers::Scalar;
pub use network::Network;

use crate::dataset::Label;
use crate::media::FrameTensor;
use ndarray::{Array2, Array3, Array4, Axis};
use serde::{Deserialize, Serialize};

/// Decision threshold applied to `score_fake`; exact ties classify fake.
pub const DEFAULT_THRESHOLD: f32 = 0.5;

/// Output classes: index 0 is real, index 1 is fake.
pub const NUM_CLASSES: usize = 2;

/// Five stride-2 stages; input dimensions must divide by this.
pub const DOWNSAMPLING_FACTOR: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("checkpoint io: {0}")]
    CheckpointIo(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Topology parameters. Paper-faithful defaults; the scaling knobs exist
/// so the full pipeline can run on a CPU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_height: usize,
    pub input_width: usize,
    /// Scales every channel count; scaled counts are floored at 1.
    pub width_multiplier: f64,
    pub middle_module_count: usize,
    pub num_classes: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_height: crate::media::DEFAULT_INPUT_HEIGHT,
            input_width: crate::media::DEFAULT_INPUT_WIDTH,
            width_multiplier: 1.0,
            middle_module_count: 8,
            num_classes: NUM_CLASSES,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// CPU-friendly configuration used by fixtures and verification.
    pub fn tiny(seed: u64) -> Self {
        ModelConfig {
            input_height: 64,
            input_width: 128,
            width_multiplier: 0.125,
            middle_module_count: 2,
            num_classes: NUM_CLASSES,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_height == 0 || self.input_width == 0 {
            return Err(ModelError::InvalidConfig(
                "input dimensions must be positive".into(),
            ));
        }
        if self.input_height % DOWNSAMPLING_FACTOR != 0
            || self.input_width % DOWNSAMPLING_FACTOR != 0
        {
            return Err(ModelError::InvalidConfig(format!(
                "input dimensions {}x{} must be divisible by {DOWNSAMPLING_FACTOR}",
                self.input_height, self.input_width
            )));
        }
        if !(self.width_multiplier.is_finite() && self.width_multiplier > 0.0) {
            return Err(ModelError::InvalidConfig(format!(
                "width_multiplier must be positive, got {}",
                self.width_multiplier
            )));
        }
        if self.num_classes != NUM_CLASSES {
            return Err(ModelError::InvalidConfig(format!(
                "the detector head is fixed at {NUM_CLASSES} outputs, got {}",
                self.num_classes
            )));
        }
        Ok(())
    }
}

/// Builds a seeded network for the given topology.
pub fn build_network<F: Scalar>(config: &ModelConfig) -> Result<Network<F>> {
    Network::build(config)
}

/// Standalone separable convolution: per-channel spatial convolution
/// followed by a 1x1 cross-channel convolution (SAME padding).
///
/// `depthwise` is `(c, kh, kw)`, `pointwise` is `(out_c, c, 1, 1)`.
pub fn separable_conv<F: Scalar>(
    input: &Array4<F>,
    depthwise: &Array3<F>,
    pointwise: &Array4<F>,
    stride: usize,
) -> Result<Array4<F>> {
    let (_, c, _, _) = input.dim();
    let (dc, _, _) = depthwise.dim();
    let (_oc, pc, pkh, pkw) = pointwise.dim();
    if dc != c || pc != c {
        return Err(ModelError::ShapeMismatch {
            expected: format!("{c} channels"),
            got: format!("depthwise {dc}, pointwise input {pc}"),
        });
    }
    if (pkh, pkw) != (1, 1) {
        return Err(ModelError::ShapeMismatch {
            expected: "1x1 pointwise kernel".into(),
            got: format!("{pkh}x{pkw}"),
        });
    }
    Ok(network::separable_conv_raw(input, depthwise, pointwise, stride))
}

/// Per-frame verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePrediction {
    pub video_id: String,
    pub frame_index: u32,
    pub score_fake: f32,
    pub predicted_label: Label,
}

/// Numerically-stable row-wise softmax.
pub fn softmax<F: Scalar>(logits: &Array2<F>) -> Array2<F> {
    let mut out = logits.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.iter().copied().sum::<F>();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Label from a fake-score: scores at or above the threshold flag fake.
pub fn label_from_score(score_fake: f32, threshold: f32) -> Label {
    if score_fake >= threshold {
        Label::Fake
    } else {
        Label::Real
    }
}

/// Stacks preprocessed frames into an NCHW batch.
pub fn stack_frames(frames: &[&FrameTensor], config: &ModelConfig) -> Result<Array4<f32>> {
    let (h, w) = (config.input_height, config.input_width);
    let mut batch = Array4::<f32>::zeros((frames.len(), 3, h, w));
    for (i, frame) in frames.iter().enumerate() {
        if frame.data.shape() != [h, w, 3] {
            return Err(ModelError::ShapeMismatch {
                expected: format!("({h}, {w}, 3)"),
                got: format!("{:?}", frame.data.shape()),
            });
        }
        for c in 0..3 {
            batch
                .index_axis_mut(Axis(0), i)
                .index_axis_mut(Axis(0), c)
                .assign(&frame.data.index_axis(Axis(2), c));
        }
    }
    Ok(batch)
}

/// Scores a batch of preprocessed frames in inference mode.
pub fn predict_frames(
    network: &Network<f32>,
    frames: &[FrameTensor],
    threshold: f32,
) -> Result<Vec<FramePrediction>> {
    let mut out = Vec::with_capacity(frames.len());
    // Inference runs at the training batch size.
    for chunk in frames.chunks(8) {
        let refs: Vec<&FrameTensor> = chunk.iter().collect();
        let batch = stack_frames(&refs, &network.config)?;
        let logits = network.forward(&batch)?;
        let probs = softmax(&logits);
        for (i, frame) in chunk.iter().enumerate() {
            let score_fake = probs[(i, 1)];
            out.push(FramePrediction {
                video_id: frame.video_id.clone(),
                frame_index: frame.frame_index,
                score_fake,
                predicted_label: label_from_score(score_fake, threshold),
            });
        }
    }
    Ok(out)
}

/// Scores a single frame.
pub fn predict_frame(
    network: &Network<f32>,
    frame: &FrameTensor,
    threshold: f32,
) -> Result<FramePrediction> {
    let preds = predict_frames(network, std::slice::from_ref(frame), threshold)?;
    Ok(preds.into_iter().next().expect("one prediction"))
}
