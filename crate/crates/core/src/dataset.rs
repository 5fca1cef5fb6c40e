//! Corpus data model: video manifests, deterministic splits, validation.
//!
//! A [`DatasetManifest`] lists every video of a corpus together with its
//! provenance (sub-dataset, label, quality level) and probed media
//! metadata. Splitting happens at video granularity, stratified by
//! `(sub_dataset, label, quality)`, so no frame of a video can leak
//! across split boundaries.

mod manifest;
mod split;
mod validate;

pub use manifest::{build_manifest, LayoutRule, ProbedMeta, VideoProber};
pub(crate) use manifest::layout_path as layout_path_for;
pub use split::{split_manifest, SplitAssignment, SplitClass, SplitRatios};
pub use validate::{validate_manifest, Finding, FindingKind, ValidationReport};

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

/// Manifest and split file schema version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("no videos found under {0}")]
    NoVideosFound(PathBuf),
    #[error("unreadable videos: {0:?}")]
    UnreadableVideos(Vec<String>),
    #[error("duplicate video_id {0:?}")]
    DuplicateVideoId(String),
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),
    #[error("stratum {0} has {1} videos, need at least 3 for a three-way split")]
    StratumTooSmall(String, usize),
    #[error("unrecognized {what} {value:?} in path {path}")]
    UnrecognizedComponent {
        what: &'static str,
        value: String,
        path: PathBuf,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, DatasetError>;

/// Which corpus a video belongs to.
///
/// `Cityvid`, `Citywcvid` and `Kittivid` are the DeepStreets sub-datasets
/// (they differ in generator architecture and segmentation-mask source);
/// `Synthetic` marks desk-scale fixture videos.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubDataset {
    Cityvid,
    Citywcvid,
    Kittivid,
    Synthetic,
}

impl SubDataset {
    pub const ALL: [SubDataset; 4] = [
        SubDataset::Cityvid,
        SubDataset::Citywcvid,
        SubDataset::Kittivid,
        SubDataset::Synthetic,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SubDataset::Cityvid => "cityvid",
            SubDataset::Citywcvid => "citywcvid",
            SubDataset::Kittivid => "kittivid",
            SubDataset::Synthetic => "synthetic",
        }
    }

    pub fn parse(s: &str) -> Option<SubDataset> {
        Self::ALL.iter().copied().find(|d| d.as_str() == s.to_ascii_lowercase())
    }
}

impl fmt::Display for SubDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ground-truth class of a video. `Fake` is the positive class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Fake => "fake",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s.to_ascii_lowercase().as_str() {
            "real" => Some(Label::Real),
            "fake" => Some(Label::Fake),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Compression quality level of a stored video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Quality {
    Raw,
    Hq,
    Lq,
}

impl Quality {
    pub const ALL: [Quality; 3] = [Quality::Raw, Quality::Hq, Quality::Lq];

    pub fn as_str(&self) -> &'static str {
        match self {
            Quality::Raw => "RAW",
            Quality::Hq => "HQ",
            Quality::Lq => "LQ",
        }
    }

    pub fn parse(s: &str) -> Option<Quality> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Some(Quality::Raw),
            "hq" => Some(Quality::Hq),
            "lq" => Some(Quality::Lq),
            _ => None,
        }
    }

    /// Directory name used by the canonical corpus layout.
    pub fn dir_name(&self) -> &'static str {
        match self {
            Quality::Raw => "raw",
            Quality::Hq => "hq",
            Quality::Lq => "lq",
        }
    }
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Codec parameters attached to a compressed video by the media harness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingParams {
    pub codec: String,
    pub rate_mode: String,
    pub rate_value: Option<u8>,
    pub pixel_format: String,
}

/// Optional predicate over manifest records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecordFilter {
    pub sub_dataset: Option<SubDataset>,
    pub label: Option<Label>,
    pub quality: Option<Quality>,
}

impl RecordFilter {
    pub fn quality(quality: Quality) -> Self {
        RecordFilter {
            quality: Some(quality),
            ..Default::default()
        }
    }

    pub fn sub_dataset(sub: SubDataset) -> Self {
        RecordFilter {
            sub_dataset: Some(sub),
            ..Default::default()
        }
    }

    pub fn matches(&self, record: &VideoRecord) -> bool {
        self.sub_dataset.map_or(true, |s| record.sub_dataset == s)
            && self.label.map_or(true, |l| record.label == l)
            && self.quality.map_or(true, |q| record.quality == q)
    }
}

/// One video of the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub path: PathBuf,
    pub sub_dataset: SubDataset,
    pub label: Label,
    pub quality: Quality,
    pub frame_count: u32,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    /// Sidecar codec metadata, present on videos produced by the
    /// compression harness, absent on RAW sources.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoding: Option<EncodingParams>,
}

impl VideoRecord {
    /// Stratum key used by splitting and balance checks.
    pub fn stratum(&self) -> (SubDataset, Label, Quality) {
        (self.sub_dataset, self.label, self.quality)
    }
}

/// Ordered collection of [`VideoRecord`]s plus corpus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub records: Vec<VideoRecord>,
    pub source_description: String,
    pub schema_version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestHeader {
    schema_version: u32,
    source_description: String,
}

impl DatasetManifest {
    pub fn new(records: Vec<VideoRecord>, source_description: impl Into<String>) -> Self {
        DatasetManifest {
            records,
            source_description: source_description.into(),
            schema_version: SCHEMA_VERSION,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, video_id: &str) -> Option<&VideoRecord> {
        self.records.iter().find(|r| r.video_id == video_id)
    }

    /// Returns an error when a video_id occurs more than once.
    pub fn check_unique_ids(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for r in &self.records {
            if !seen.insert(r.video_id.as_str()) {
                return Err(DatasetError::DuplicateVideoId(r.video_id.clone()));
            }
        }
        Ok(())
    }

    /// Serializes to the line-delimited manifest format: a header line
    /// carrying `schema_version` and `source_description`, then exactly one
    /// JSON object per record.
    pub fn to_jsonl(&self) -> String {
        let header = ManifestHeader {
            schema_version: self.schema_version,
            source_description: self.source_description.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("header serialization");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serialization"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header_line) = lines.next().ok_or_else(|| DatasetError::Parse {
            path: origin.to_path_buf(),
            line: 1,
            message: "empty manifest file".into(),
        })?;
        let header: ManifestHeader =
            serde_json::from_str(header_line).map_err(|e| DatasetError::Parse {
                path: origin.to_path_buf(),
                line: 1,
                message: e.to_string(),
            })?;
        let mut records = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let record: VideoRecord =
                serde_json::from_str(line).map_err(|e| DatasetError::Parse {
                    path: origin.to_path_buf(),
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            records.push(record);
        }
        Ok(DatasetManifest {
            records,
            source_description: header.source_description,
            schema_version: header.schema_version,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_jsonl(&text, path)
    }
}
