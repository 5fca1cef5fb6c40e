//! Frame loading for the optimization loop. Videos are decoded once and
//! kept as 8-bit RGB at native resolution; preprocessing runs per batch
//! through the same path inference uses.

use super::{Result, TrainError};
use crate::dataset::{DatasetManifest, Label, RecordFilter, SplitAssignment, SplitClass};
use crate::media::{extract_frames, preprocess_frame, RawFrame};
use crate::model::{stack_frames, ModelConfig};
use ndarray::Array4;
use rayon::prelude::*;

/// One decoded frame retained for training.
#[derive(Debug, Clone)]
pub struct StoredFrame {
    pub video_id: String,
    pub frame_index: u32,
    pub label: Label,
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<u8>,
}

impl StoredFrame {
    fn as_raw(&self) -> RawFrame {
        RawFrame {
            video_id: self.video_id.clone(),
            frame_index: self.frame_index,
            width: self.width,
            height: self.height,
            rgb: self.rgb.clone(),
        }
    }
}

/// All frames of one split, in manifest order.
#[derive(Debug, Clone, Default)]
pub struct FrameSet {
    pub frames: Vec<StoredFrame>,
    pub video_count: usize,
}

impl FrameSet {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Decodes every video of `class` (after filtering) into memory.
pub fn load_frame_set(
    manifest: &DatasetManifest,
    assignment: &SplitAssignment,
    class: SplitClass,
    filter: &RecordFilter,
) -> Result<FrameSet> {
    let records: Vec<_> = manifest
        .records
        .iter()
        .filter(|r| assignment.class_of(&r.video_id) == Some(class) && filter.matches(r))
        .collect();
    let per_video: Vec<Result<Vec<StoredFrame>>> = records
        .par_iter()
        .map(|record| {
            let frames = extract_frames(record)?;
            Ok(frames
                .into_iter()
                .map(|f| StoredFrame {
                    video_id: f.video_id,
                    frame_index: f.frame_index,
                    label: record.label,
                    width: f.width,
                    height: f.height,
                    rgb: f.rgb,
                })
                .collect())
        })
        .collect();
    let mut frames = Vec::new();
    for result in per_video {
        frames.extend(result?);
    }
    Ok(FrameSet {
        frames,
        video_count: records.len(),
    })
}

/// Preprocesses and stacks a batch of stored frames.
pub(crate) fn assemble_batch(
    frames: &[&StoredFrame],
    config: &ModelConfig,
) -> Result<(Array4<f32>, Vec<Label>)> {
    if frames.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let tensors: Vec<_> = frames
        .iter()
        .map(|f| preprocess_frame(&f.as_raw(), config.input_height, config.input_width))
        .collect::<std::result::Result<_, _>>()?;
    let refs: Vec<_> = tensors.iter().collect();
    let batch = stack_frames(&refs, config)?;
    let labels = frames.iter().map(|f| f.label).collect();
    Ok((batch, labels))
}
