//! Fixture provenance: the manifest's `source_description` embeds the
//! generating config and a checksum over the records, so tampering with
//! labels or metadata is detectable and foreign manifests are rejected.

use super::{FixtureConfig, Result, SynthError};
use crate::dataset::{DatasetManifest, Label, VideoRecord};
use sha2::{Digest, Sha256};

const MARKER: &str = "synthgen:v1";

pub(crate) fn fixture_checksum(config: &FixtureConfig, records: &[VideoRecord]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config.canonical().as_bytes());
    for r in records {
        hasher.update(
            format!(
                "\n{}|{}|{}|{}|{}|{}",
                r.video_id, r.label, r.quality, r.frame_count, r.width, r.height
            )
            .as_bytes(),
        );
    }
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn source_description(config: &FixtureConfig, checksum: &str) -> String {
    format!("{MARKER};cfg={};checksum={checksum}", config.canonical())
}

fn parse_source_description(text: &str) -> Result<(FixtureConfig, String)> {
    let rest = text
        .strip_prefix(MARKER)
        .ok_or(SynthError::ForeignManifest)?;
    let rest = rest
        .strip_prefix(";cfg=")
        .ok_or_else(|| SynthError::MalformedProvenance("missing cfg section".into()))?;
    let (cfg_text, checksum) = rest
        .rsplit_once(";checksum=")
        .ok_or_else(|| SynthError::MalformedProvenance("missing checksum".into()))?;
    Ok((FixtureConfig::from_canonical(cfg_text)?, checksum.to_string()))
}

/// Renders a human-readable provenance document for a fixture manifest,
/// verifying its checksum on the way.
pub fn describe_fixture(manifest: &DatasetManifest) -> Result<String> {
    let (config, recorded) = parse_source_description(&manifest.source_description)?;
    let recomputed = fixture_checksum(&config, &manifest.records);
    if recomputed != recorded {
        return Err(SynthError::ChecksumMismatch);
    }
    let reals = manifest.records.iter().filter(|r| r.label == Label::Real).count();
    let fakes = manifest.len() - reals;
    let mut doc = String::new();
    doc.push_str("fixture provenance\n");
    doc.push_str("==================\n");
    doc.push_str("generator: synthgen v1\n");
    doc.push_str(&format!("sub_dataset: {}\n", config.sub_dataset));
    doc.push_str(&format!("videos_per_class: {}\n", config.num_videos_per_class));
    doc.push_str(&format!("frames_per_video: {}\n", config.frames_per_video));
    doc.push_str(&format!("resolution: {}x{}\n", config.width, config.height));
    doc.push_str(&format!("fps: {}\n", config.fps));
    doc.push_str(&format!("artifact_type: {}\n", config.artifact_type));
    doc.push_str(&format!("artifact_strength: {}\n", config.artifact_strength));
    doc.push_str(&format!("seed: {}\n", config.seed));
    doc.push_str(&format!("records: {} ({reals} real / {fakes} fake)\n", manifest.len()));
    doc.push_str(&format!("checksum: {recorded}\n"));
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::super::generate_fixture;
    use super::*;
    use crate::dataset::Label;

    fn fixture(seed: u64) -> (tempfile::TempDir, DatasetManifest) {
        let dir = tempfile::tempdir().unwrap();
        let config = FixtureConfig {
            num_videos_per_class: 2,
            frames_per_video: 3,
            width: 64,
            height: 32,
            seed,
            ..FixtureConfig::default()
        };
        let manifest = generate_fixture(&config, dir.path()).unwrap();
        (dir, manifest)
    }

    #[test]
    fn document_echoes_config_fields() {
        let (_dir, manifest) = fixture(7);
        let doc = describe_fixture(&manifest).unwrap();
        assert!(doc.contains("videos_per_class: 2"));
        assert!(doc.contains("frames_per_video: 3"));
        assert!(doc.contains("resolution: 64x32"));
        assert!(doc.contains("artifact_type: checkerboard"));
        assert!(doc.contains("artifact_strength: 0.5"));
        assert!(doc.contains("seed: 7"));
        assert!(doc.contains("records: 4 (2 real / 2 fake)"));
    }

    #[test]
    fn tampered_label_is_detected() {
        let (_dir, mut manifest) = fixture(7);
        manifest.records[0].label = match manifest.records[0].label {
            Label::Real => Label::Fake,
            Label::Fake => Label::Real,
        };
        assert!(matches!(
            describe_fixture(&manifest),
            Err(SynthError::ChecksumMismatch)
        ));
    }

    #[test]
    fn foreign_manifest_is_rejected() {
        let (_dir, mut manifest) = fixture(7);
        manifest.source_description = "scanned from /data".into();
        assert!(matches!(
            describe_fixture(&manifest),
            Err(SynthError::ForeignManifest)
        ));
    }

    #[test]
    fn seed_is_the_only_config_difference_in_documents() {
        let (_da, a) = fixture(1);
        let (_db, b) = fixture(2);
        let doc_a = describe_fixture(&a).unwrap();
        let doc_b = describe_fixture(&b).unwrap();
        let diff: Vec<(&str, &str)> = doc_a
            .lines()
            .zip(doc_b.lines())
            .filter(|(x, y)| x != y)
            .collect();
        for (x, _) in &diff {
            assert!(
                x.starts_with("seed:") || x.starts_with("checksum:"),
                "unexpected difference: {x}"
            );
        }
        assert_eq!(diff.len(), 2);
    }
}
