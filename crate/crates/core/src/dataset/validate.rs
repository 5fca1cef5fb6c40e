//! Manifest health checks. Every finding is a report entry, never an error.

use super::{DatasetManifest, Label, Quality, SubDataset, VideoProber};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FindingKind {
    DuplicateId,
    MissingFile,
    UnreadableVideo,
    MetadataMismatch,
    LabelImbalance,
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FindingKind::DuplicateId => "duplicate id",
            FindingKind::MissingFile => "missing file",
            FindingKind::UnreadableVideo => "unreadable video",
            FindingKind::MetadataMismatch => "metadata mismatch",
            FindingKind::LabelImbalance => "label imbalance",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub kind: FindingKind,
    pub video_id: Option<String>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn count(&self, kind: &FindingKind) -> usize {
        self.findings.iter().filter(|f| &f.kind == kind).count()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_clean() {
            return writeln!(f, "manifest OK: no findings");
        }
        for finding in &self.findings {
            match &finding.video_id {
                Some(id) => writeln!(f, "{}: {} ({})", finding.kind, id, finding.detail)?,
                None => writeln!(f, "{}: {}", finding.kind, finding.detail)?,
            }
        }
        Ok(())
    }
}

/// Checks a manifest against the filesystem and its own invariants:
/// duplicate ids, missing files, probed-vs-recorded metadata drift, and
/// per-stratum label imbalance.
pub fn validate_manifest(manifest: &DatasetManifest, prober: &dyn VideoProber) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &manifest.records {
        *seen.entry(r.video_id.as_str()).or_insert(0) += 1;
    }
    for (id, n) in seen {
        if n > 1 {
            report.findings.push(Finding {
                kind: FindingKind::DuplicateId,
                video_id: Some(id.to_string()),
                detail: format!("appears {n} times"),
            });
        }
    }

    for r in &manifest.records {
        if !r.path.exists() {
            report.findings.push(Finding {
                kind: FindingKind::MissingFile,
                video_id: Some(r.video_id.clone()),
                detail: r.path.display().to_string(),
            });
            continue;
        }
        match prober.probe(&r.path) {
            Err(reason) => report.findings.push(Finding {
                kind: FindingKind::UnreadableVideo,
                video_id: Some(r.video_id.clone()),
                detail: reason,
            }),
            Ok(meta) => {
                let mut mismatches = Vec::new();
                if meta.frame_count != r.frame_count {
                    mismatches.push(format!(
                        "frame_count recorded {} probed {}",
                        r.frame_count, meta.frame_count
                    ));
                }
                if meta.width != r.width || meta.height != r.height {
                    mismatches.push(format!(
                        "resolution recorded {}x{} probed {}x{}",
                        r.width, r.height, meta.width, meta.height
                    ));
                }
                for m in mismatches {
                    report.findings.push(Finding {
                        kind: FindingKind::MetadataMismatch,
                        video_id: Some(r.video_id.clone()),
                        detail: m,
                    });
                }
            }
        }
    }

    let mut strata: BTreeMap<(SubDataset, Quality), (usize, usize)> = BTreeMap::new();
    for r in &manifest.records {
        let entry = strata.entry((r.sub_dataset, r.quality)).or_insert((0, 0));
        match r.label {
            Label::Real => entry.0 += 1,
            Label::Fake => entry.1 += 1,
        }
    }
    for ((sub, quality), (real, fake)) in strata {
        if real != fake {
            report.findings.push(Finding {
                kind: FindingKind::LabelImbalance,
                video_id: None,
                detail: format!("{sub}/{quality}: {real} real vs {fake} fake"),
            });
        }
    }

    report
}

#[cfg(test)]
mod tests {
    use super::super::manifest::ProbedMeta;
    use super::super::tests::record;
    use super::*;
    use std::path::Path;

    struct FixedProber {
        frame_count: u32,
    }

    impl VideoProber for FixedProber {
        fn probe(&self, _path: &Path) -> Result<ProbedMeta, String> {
            Ok(ProbedMeta {
                frame_count: self.frame_count,
                width: 128,
                height: 64,
                fps: 10.0,
                encoding: None,
            })
        }
    }

    fn manifest_on_disk(dir: &Path) -> DatasetManifest {
        let mut a = record("a", SubDataset::Cityvid, Label::Real, Quality::Raw);
        let mut b = record("b", SubDataset::Cityvid, Label::Fake, Quality::Raw);
        a.path = dir.join("a.avi");
        b.path = dir.join("b.avi");
        std::fs::write(&a.path, b"x").unwrap();
        std::fs::write(&b.path, b"x").unwrap();
        DatasetManifest::new(vec![a, b], "test")
    }

    #[test]
    fn well_formed_manifest_has_no_findings() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = manifest_on_disk(dir.path());
        let report = validate_manifest(&manifest, &FixedProber { frame_count: 30 });
        assert!(report.is_clean(), "unexpected findings: {report}");
    }

    #[test]
    fn duplicate_id_yields_one_finding() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = manifest_on_disk(dir.path());
        let mut dup = manifest.records[0].clone();
        dup.label = Label::Fake;
        manifest.records.push(dup);
        let report = validate_manifest(&manifest, &FixedProber { frame_count: 30 });
        assert_eq!(report.count(&FindingKind::DuplicateId), 1);
    }

    #[test]
    fn frame_count_drift_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = manifest_on_disk(dir.path());
        // Probe sees 29 frames where the manifest recorded 30.
        let report = validate_manifest(&manifest, &FixedProber { frame_count: 29 });
        assert_eq!(report.count(&FindingKind::MetadataMismatch), 2);
        assert!(report.findings.iter().any(|f| f.detail.contains("recorded 30 probed 29")));
    }

    #[test]
    fn missing_file_and_imbalance_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = manifest_on_disk(dir.path());
        manifest.records[1].path = dir.path().join("gone.avi");
        manifest.records[1].label = Label::Real;
        let report = validate_manifest(&manifest, &FixedProber { frame_count: 30 });
        assert_eq!(report.count(&FindingKind::MissingFile), 1);
        assert_eq!(report.count(&FindingKind::LabelImbalance), 1);
    }
}
