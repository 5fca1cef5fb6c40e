//! Video codec harness and frame pipeline.
//!
//! Videos live in AVI containers: RAW quality is stored as uncompressed
//! bottom-up BGR24 (lossless), HQ/LQ are H.264 streams produced at a
//! constant quantisation parameter (23 and 40 respectively). Decoded
//! frames flow through [`preprocess_frame`]: bilinear resize to the
//! network resolution, then a linear map of 8-bit values onto [-1, 1].

pub mod avi;
mod codec;
mod frames;
mod yuv;

pub use codec::{compress_file, compress_video};
pub use frames::{extract_frames, preprocess_frame, AviProber, FrameTensor, RawFrame};
pub use yuv::{i420_to_rgb, rgb_to_i420};

use crate::dataset::Quality;
use std::path::PathBuf;

/// H.264 quantisation parameter for HQ encodes.
pub const HQ_RATE_PARAMETER: u8 = 23;
/// H.264 quantisation parameter for LQ encodes.
pub const LQ_RATE_PARAMETER: u8 = 40;

/// Network input height after preprocessing.
pub const DEFAULT_INPUT_HEIGHT: usize = 256;
/// Network input width after preprocessing.
pub const DEFAULT_INPUT_WIDTH: usize = 512;

#[derive(Debug, thiserror::Error)]
pub enum MediaError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid container: {reason}")]
    Container { path: PathBuf, reason: String },
    #[error("RAW is not an encoding target")]
    RawNotEncodable,
    #[error("encoder failure: {0}")]
    Encoder(String),
    #[error("decode failure at frame {frame_index}: {reason}")]
    Decode { frame_index: u32, reason: String },
    #[error("frame count mismatch: expected {expected}, got {actual}")]
    FrameCountMismatch { expected: u32, actual: u32 },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
}

pub type Result<T> = std::result::Result<T, MediaError>;

/// A named quality level plus its H.264 rate parameter (absent for RAW).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QualityLevel {
    pub name: Quality,
    pub rate_parameter: Option<u8>,
}

impl QualityLevel {
    pub const RAW: QualityLevel = QualityLevel {
        name: Quality::Raw,
        rate_parameter: None,
    };
    pub const HQ: QualityLevel = QualityLevel {
        name: Quality::Hq,
        rate_parameter: Some(HQ_RATE_PARAMETER),
    };
    pub const LQ: QualityLevel = QualityLevel {
        name: Quality::Lq,
        rate_parameter: Some(LQ_RATE_PARAMETER),
    };

    pub fn of(quality: Quality) -> QualityLevel {
        match quality {
            Quality::Raw => QualityLevel::RAW,
            Quality::Hq => QualityLevel::HQ,
            Quality::Lq => QualityLevel::LQ,
        }
    }
}
