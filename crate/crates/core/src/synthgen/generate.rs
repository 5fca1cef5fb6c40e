//! Fixture emission: paired real/fake RAW videos plus a checksummed
//! manifest.

use super::artifact::apply_artifact;
use super::provenance::{fixture_checksum, source_description};
use super::scene::Scene;
use super::{FixtureConfig, Result};
use crate::dataset::{DatasetManifest, Label, Quality, VideoRecord};
use crate::media::avi::{rgb_to_dib, write_avi, AviVideo, StoredFrame, VideoCodec};
use rayon::prelude::*;
use std::path::Path;

fn render_video(config: &FixtureConfig, index: usize, label: Label) -> Vec<Vec<u8>> {
    let (w, h) = (config.width as usize, config.height as usize);
    let scene = Scene::new(config.seed, index, w, h);
    (0..config.frames_per_video)
        .map(|t| {
            let frame = scene.render(t);
            match label {
                Label::Real => frame,
                Label::Fake => apply_artifact(
                    config.artifact_type,
                    config.artifact_strength,
                    &frame,
                    w,
                    h,
                ),
            }
        })
        .collect()
}

/// Writes `2 * num_videos_per_class` RAW videos under
/// `<out>/<sub_dataset>/<label>/raw/` and returns a balanced manifest.
/// Fake video `i` shares the scene of real video `i`; the injected
/// artifact is the only difference.
pub fn generate_fixture(config: &FixtureConfig, out_dir: &Path) -> Result<DatasetManifest> {
    config.validate()?;
    let jobs: Vec<(usize, Label)> = (0..config.num_videos_per_class)
        .flat_map(|i| [(i, Label::Real), (i, Label::Fake)])
        .collect();

    let records: Vec<Result<VideoRecord>> = jobs
        .par_iter()
        .map(|&(index, label)| {
            let frames = render_video(config, index, label);
            let path = config.out_path(out_dir, label, index);
            let stored: Vec<StoredFrame> = frames
                .iter()
                .map(|rgb| StoredFrame {
                    data: rgb_to_dib(rgb, config.width, config.height),
                    keyframe: true,
                })
                .collect();
            write_avi(
                &path,
                &AviVideo {
                    codec: VideoCodec::RawRgb,
                    width: config.width,
                    height: config.height,
                    fps: config.fps,
                    comment: None,
                    frames: stored,
                },
            )?;
            let video_id = path
                .strip_prefix(out_dir)
                .unwrap_or(&path)
                .with_extension("")
                .to_string_lossy()
                .replace(std::path::MAIN_SEPARATOR, "/");
            Ok(VideoRecord {
                video_id,
                path,
                sub_dataset: config.sub_dataset,
                label,
                quality: Quality::Raw,
                frame_count: config.frames_per_video,
                width: config.width,
                height: config.height,
                fps: config.fps,
                encoding: None,
            })
        })
        .collect();

    let mut records = records.into_iter().collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.path.cmp(&b.path));
    let checksum = fixture_checksum(config, &records);
    let manifest = DatasetManifest::new(records, source_description(config, &checksum));
    manifest.check_unique_ids()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SubDataset;
    use crate::media::extract_frames;

    fn small_config(seed: u64) -> FixtureConfig {
        FixtureConfig {
            num_videos_per_class: 2,
            frames_per_video: 4,
            width: 64,
            height: 32,
            seed,
            ..FixtureConfig::default()
        }
    }

    #[test]
    fn fixture_is_balanced_and_byte_deterministic() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let manifest_a = generate_fixture(&small_config(7), dir_a.path()).unwrap();
        let manifest_b = generate_fixture(&small_config(7), dir_b.path()).unwrap();

        assert_eq!(manifest_a.len(), 4);
        let reals = manifest_a.records.iter().filter(|r| r.label == Label::Real).count();
        assert_eq!(reals, 2);

        for (a, b) in manifest_a.records.iter().zip(&manifest_b.records) {
            assert_eq!(a.video_id, b.video_id);
            let bytes_a = std::fs::read(&a.path).unwrap();
            let bytes_b = std::fs::read(&b.path).unwrap();
            assert_eq!(bytes_a, bytes_b, "{} differs between runs", a.video_id);
        }
        // Same-index real and fake videos differ only by the artifact.
        let real = manifest_a.record("synthetic/real/raw/video0000").unwrap();
        let fake = manifest_a.record("synthetic/fake/raw/video0000").unwrap();
        assert_ne!(
            std::fs::read(&real.path).unwrap(),
            std::fs::read(&fake.path).unwrap()
        );
    }

    #[test]
    fn emitted_videos_decode_to_declared_geometry() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate_fixture(&small_config(3), dir.path()).unwrap();
        for record in &manifest.records {
            let frames = extract_frames(record).unwrap();
            assert_eq!(frames.len(), 4);
            assert_eq!(frames[0].width, 64);
            assert_eq!(frames[0].height, 32);
        }
    }

    #[test]
    fn sub_dataset_tag_controls_layout() {
        let dir = tempfile::tempdir().unwrap();
        let config = FixtureConfig {
            sub_dataset: SubDataset::Cityvid,
            ..small_config(1)
        };
        let manifest = generate_fixture(&config, dir.path()).unwrap();
        assert!(manifest
            .records
            .iter()
            .all(|r| r.video_id.starts_with("cityvid/") && r.sub_dataset == SubDataset::Cityvid));
    }
}
