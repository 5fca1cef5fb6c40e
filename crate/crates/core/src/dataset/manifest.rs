//! Manifest construction from an on-disk corpus layout.

use super::{
    DatasetError, DatasetManifest, EncodingParams, Label, Quality, Result, SubDataset, VideoRecord,
};
use std::path::{Path, PathBuf};
use walkdir::WalkDir;

/// Media metadata recovered from a video container.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbedMeta {
    pub frame_count: u32,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub encoding: Option<EncodingParams>,
}

/// Container inspection used while building and validating manifests.
///
/// The media module provides the real implementation; tests may stub it.
pub trait VideoProber: Sync {
    fn probe(&self, path: &Path) -> std::result::Result<ProbedMeta, String>;
}

/// Maps a directory layout onto `(sub_dataset, label, quality)` tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutRule {
    /// `<root>/<sub_dataset>/<label>/<quality>/<video>` with component
    /// names `cityvid|citywcvid|kittivid|synthetic`, `real|fake`,
    /// `raw|hq|lq` (case-insensitive).
    SubsetLabelQuality,
}

impl LayoutRule {
    fn classify(&self, root: &Path, path: &Path) -> Result<(SubDataset, Label, Quality)> {
        let rel = path.strip_prefix(root).unwrap_or(path);
        let parts: Vec<&str> = rel
            .components()
            .filter_map(|c| c.as_os_str().to_str())
            .collect();
        if parts.len() < 4 {
            return Err(DatasetError::UnrecognizedComponent {
                what: "layout depth",
                value: rel.display().to_string(),
                path: path.to_path_buf(),
            });
        }
        let sub = SubDataset::parse(parts[0]).ok_or_else(|| DatasetError::UnrecognizedComponent {
            what: "sub_dataset",
            value: parts[0].to_string(),
            path: path.to_path_buf(),
        })?;
        let label = Label::parse(parts[1]).ok_or_else(|| DatasetError::UnrecognizedComponent {
            what: "label",
            value: parts[1].to_string(),
            path: path.to_path_buf(),
        })?;
        let quality = Quality::parse(parts[2]).ok_or_else(|| DatasetError::UnrecognizedComponent {
            what: "quality",
            value: parts[2].to_string(),
            path: path.to_path_buf(),
        })?;
        Ok((sub, label, quality))
    }
}

/// Canonical relative path for a corpus video under the
/// [`LayoutRule::SubsetLabelQuality`] layout.
pub(crate) fn layout_path(
    sub: SubDataset,
    label: Label,
    quality: Quality,
    file_name: &str,
) -> PathBuf {
    PathBuf::from(sub.as_str())
        .join(label.as_str())
        .join(quality.dir_name())
        .join(file_name)
}

fn is_video_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.eq_ignore_ascii_case("avi"))
        .unwrap_or(false)
}

/// Scans `root` for videos, probes their containers and assembles a
/// manifest ordered lexicographically by path.
///
/// With `permissive` unset, any unreadable video fails the build; with it
/// set, unreadable videos are skipped (they are still reported by
/// [`super::validate_manifest`] when the manifest is revalidated).
pub fn build_manifest(
    root: &Path,
    rule: LayoutRule,
    prober: &dyn VideoProber,
    permissive: bool,
) -> Result<DatasetManifest> {
    if !root.exists() {
        return Err(DatasetError::Io {
            path: root.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "corpus root not found"),
        });
    }
    let mut paths: Vec<PathBuf> = WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file() && is_video_file(e.path()))
        .map(|e| e.into_path())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(DatasetError::NoVideosFound(root.to_path_buf()));
    }

    let mut records = Vec::with_capacity(paths.len());
    let mut unreadable = Vec::new();
    for path in paths {
        let (sub_dataset, label, quality) = rule.classify(root, &path)?;
        let meta = match prober.probe(&path) {
            Ok(meta) => meta,
            Err(reason) => {
                unreadable.push(format!("{}: {reason}", path.display()));
                continue;
            }
        };
        let video_id = path
            .strip_prefix(root)
            .unwrap_or(&path)
            .with_extension("")
            .to_string_lossy()
            .replace(std::path::MAIN_SEPARATOR, "/");
        records.push(VideoRecord {
            video_id,
            path,
            sub_dataset,
            label,
            quality,
            frame_count: meta.frame_count,
            width: meta.width,
            height: meta.height,
            fps: meta.fps,
            encoding: meta.encoding,
        });
    }

    if !unreadable.is_empty() && !permissive {
        return Err(DatasetError::UnreadableVideos(unreadable));
    }
    if records.is_empty() {
        return Err(DatasetError::NoVideosFound(root.to_path_buf()));
    }
    let manifest = DatasetManifest::new(records, format!("scanned from {}", root.display()));
    manifest.check_unique_ids()?;
    Ok(manifest)
}
