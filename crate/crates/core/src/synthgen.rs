//! Deterministic desk-scale fixture corpus.
//!
//! "Real" videos are temporally coherent multi-octave noise scenes with
//! a natural 1/f-like spectrum. "Fake" videos are the same scenes with a
//! synthetic generator trace injected: a periodic checkerboard residual
//! (the footprint of strided upsampling), a mid-band spectral notch, or
//! texture smoothing. Content is a pure function of (config, seed, video
//! index), so fixtures are reproducible byte for byte.

mod artifact;
mod generate;
mod provenance;
mod scene;

pub use generate::generate_fixture;
pub use provenance::describe_fixture;

use crate::dataset::SubDataset;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid fixture config: {0}")]
    InvalidConfig(String),
    #[error("manifest was not produced by the fixture generator")]
    ForeignManifest,
    #[error("fixture checksum mismatch: manifest records were modified")]
    ChecksumMismatch,
    #[error("malformed fixture provenance: {0}")]
    MalformedProvenance(String),
    #[error(transparent)]
    Media(#[from] crate::media::MediaError),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
}

pub type Result<T> = std::result::Result<T, SynthError>;

/// Generator trace injected into the fake class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactType {
    Checkerboard,
    SpectralNotch,
    TextureSmoothing,
}

impl ArtifactType {
    pub const ALL: [ArtifactType; 3] = [
        ArtifactType::Checkerboard,
        ArtifactType::SpectralNotch,
        ArtifactType::TextureSmoothing,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ArtifactType::Checkerboard => "checkerboard",
            ArtifactType::SpectralNotch => "spectral_notch",
            ArtifactType::TextureSmoothing => "texture_smoothing",
        }
    }

    pub fn parse(s: &str) -> Option<ArtifactType> {
        Self::ALL.iter().copied().find(|a| a.as_str() == s)
    }
}

impl fmt::Display for ArtifactType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureConfig {
    pub num_videos_per_class: usize,
    pub frames_per_video: u32,
    pub width: u32,
    pub height: u32,
    pub artifact_type: ArtifactType,
    /// In (0, 1]; scales the injected trace.
    pub artifact_strength: f64,
    pub seed: u64,
    /// Tag recorded in the manifest; cross-dataset experiments generate
    /// one fixture per sub-dataset tag.
    pub sub_dataset: SubDataset,
    pub fps: f64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            num_videos_per_class: 40,
            frames_per_video: 30,
            width: 128,
            height: 64,
            artifact_type: ArtifactType::Checkerboard,
            artifact_strength: 0.5,
            seed: 0,
            sub_dataset: SubDataset::Synthetic,
            fps: 10.0,
        }
    }
}

impl FixtureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_videos_per_class == 0 {
            return Err(SynthError::InvalidConfig(
                "num_videos_per_class must be at least 1".into(),
            ));
        }
        if self.frames_per_video == 0 {
            return Err(SynthError::InvalidConfig(
                "frames_per_video must be at least 1".into(),
            ));
        }
        let factor = crate::model::DOWNSAMPLING_FACTOR as u32;
        if self.width % factor != 0 || self.height % factor != 0 {
            return Err(SynthError::InvalidConfig(format!(
                "fixture resolution {}x{} is incompatible with the model's \
                 downsampling factor {factor}",
                self.width, self.height
            )));
        }
        if !(self.artifact_strength.is_finite()
            && self.artifact_strength > 0.0
            && self.artifact_strength <= 1.0)
        {
            return Err(SynthError::InvalidConfig(format!(
                "artifact_strength must lie in (0, 1], got {}",
                self.artifact_strength
            )));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(SynthError::InvalidConfig(format!(
                "fps must be positive, got {}",
                self.fps
            )));
        }
        Ok(())
    }

    /// Canonical key=value form embedded in fixture provenance.
    pub(crate) fn canonical(&self) -> String {
        format!(
            "num_videos_per_class={},frames_per_video={},width={},height={},\
             artifact_type={},artifact_strength={},seed={},sub_dataset={},fps={}",
            self.num_videos_per_class,
            self.frames_per_video,
            self.width,
            self.height,
            self.artifact_type,
            self.artifact_strength,
            self.seed,
            self.sub_dataset,
            self.fps
        )
    }

    pub(crate) fn from_canonical(text: &str) -> Result<Self> {
        let mut cfg = FixtureConfig::default();
        for pair in text.split(',') {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| SynthError::MalformedProvenance(format!("bad pair {pair:?}")))?;
            let bad = |what: &str| SynthError::MalformedProvenance(format!("bad {what}: {value}"));
            match key {
                "num_videos_per_class" => {
                    cfg.num_videos_per_class = value.parse().map_err(|_| bad(key))?
                }
                "frames_per_video" => cfg.frames_per_video = value.parse().map_err(|_| bad(key))?,
                "width" => cfg.width = value.parse().map_err(|_| bad(key))?,
                "height" => cfg.height = value.parse().map_err(|_| bad(key))?,
                "artifact_type" => {
                    cfg.artifact_type = ArtifactType::parse(value).ok_or_else(|| bad(key))?
                }
                "artifact_strength" => {
                    cfg.artifact_strength = value.parse().map_err(|_| bad(key))?
                }
                "seed" => cfg.seed = value.parse().map_err(|_| bad(key))?,
                "sub_dataset" => {
                    cfg.sub_dataset = SubDataset::parse(value).ok_or_else(|| bad(key))?
                }
                "fps" => cfg.fps = value.parse().map_err(|_| bad(key))?,
                other => {
                    return Err(SynthError::MalformedProvenance(format!(
                        "unknown key {other:?}"
                    )))
                }
            }
        }
        Ok(cfg)
    }

    pub(crate) fn video_file_name(index: usize) -> String {
        format!("video{index:04}.avi")
    }

    pub(crate) fn out_path(
        &self,
        out_dir: &std::path::Path,
        label: crate::dataset::Label,
        index: usize,
    ) -> PathBuf {
        out_dir.join(crate::dataset::layout_path_for(
            self.sub_dataset,
            label,
            crate::dataset::Quality::Raw,
            &Self::video_file_name(index),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_config_round_trips() {
        let cfg = FixtureConfig {
            num_videos_per_class: 7,
            frames_per_video: 12,
            width: 64,
            height: 32,
            artifact_type: ArtifactType::SpectralNotch,
            artifact_strength: 0.75,
            seed: 99,
            sub_dataset: SubDataset::Kittivid,
            fps: 10.0,
        };
        let parsed = FixtureConfig::from_canonical(&cfg.canonical()).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn config_validation() {
        let mut cfg = FixtureConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.width = 100;
        assert!(cfg.validate().is_err());
        let mut cfg = FixtureConfig::default();
        cfg.artifact_strength = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = FixtureConfig::default();
        cfg.artifact_strength = 1.5;
        assert!(cfg.validate().is_err());
    }
}
