//! Deterministic stratified train/val/test splitting at video granularity.

use super::{DatasetError, DatasetManifest, Label, Quality, Result, SubDataset, SCHEMA_VERSION};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitClass {
    Train,
    Val,
    Test,
}

impl SplitClass {
    pub const ALL: [SplitClass; 3] = [SplitClass::Train, SplitClass::Val, SplitClass::Test];

    pub fn as_str(&self) -> &'static str {
        match self {
            SplitClass::Train => "train",
            SplitClass::Val => "val",
            SplitClass::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<SplitClass> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Some(SplitClass::Train),
            "val" => Some(SplitClass::Val),
            "test" => Some(SplitClass::Test),
            _ => None,
        }
    }
}

impl fmt::Display for SplitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Train/val/test fractions; must be positive and sum to 1 within 1e-9.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const PAPER: SplitRatios = SplitRatios {
        train: 0.60,
        val: 0.25,
        test: 0.15,
    };

    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = SplitRatios { train, val, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("train", self.train), ("val", self.val), ("test", self.test)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(DatasetError::InvalidRatios(format!(
                    "ratio_{name} must be positive, got {v}"
                )));
            }
        }
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidRatios(format!(
                "ratios must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

/// Total, disjoint assignment of every manifest video to a split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    /// Insertion order follows the manifest's record order.
    assignments: Vec<(String, SplitClass)>,
    index: BTreeMap<String, SplitClass>,
    pub seed: u64,
    pub ratios: SplitRatios,
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitHeader {
    schema_version: u32,
    seed: u64,
    ratios: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitLine {
    video_id: String,
    split: SplitClass,
}

impl SplitAssignment {
    fn new(assignments: Vec<(String, SplitClass)>, seed: u64, ratios: SplitRatios) -> Self {
        let index = assignments.iter().cloned().collect();
        SplitAssignment {
            assignments,
            index,
            seed,
            ratios,
        }
    }

    pub fn class_of(&self, video_id: &str) -> Option<SplitClass> {
        self.index.get(video_id).copied()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, SplitClass)> {
        self.assignments.iter().map(|(id, c)| (id.as_str(), *c))
    }

    pub fn count(&self, class: SplitClass) -> usize {
        self.assignments.iter().filter(|(_, c)| *c == class).count()
    }

    pub fn ids_in(&self, class: SplitClass) -> Vec<&str> {
        self.assignments
            .iter()
            .filter(|(_, c)| *c == class)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let header = SplitHeader {
            schema_version: SCHEMA_VERSION,
            seed: self.seed,
            ratios: self.ratios.as_array(),
        };
        let mut out = serde_json::to_string(&header).expect("header serialization");
        out.push('\n');
        for (video_id, split) in &self.assignments {
            let line = SplitLine {
                video_id: video_id.clone(),
                split: *split,
            };
            out.push_str(&serde_json::to_string(&line).expect("line serialization"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header_line) = lines.next().ok_or_else(|| DatasetError::Parse {
            path: origin.to_path_buf(),
            line: 1,
            message: "empty split file".into(),
        })?;
        let header: SplitHeader =
            serde_json::from_str(header_line).map_err(|e| DatasetError::Parse {
                path: origin.to_path_buf(),
                line: 1,
                message: e.to_string(),
            })?;
        let mut assignments = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: SplitLine = serde_json::from_str(line).map_err(|e| DatasetError::Parse {
                path: origin.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })?;
            assignments.push((parsed.video_id, parsed.split));
        }
        let [train, val, test] = header.ratios;
        Ok(SplitAssignment::new(
            assignments,
            header.seed,
            SplitRatios { train, val, test },
        ))
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

/// Largest-remainder apportionment of `n` items into three buckets.
fn apportion(n: usize, ratios: &SplitRatios) -> [usize; 3] {
    let quotas = ratios.as_array().map(|r| r * n as f64);
    let mut counts = quotas.map(|q| q.floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    // Ties favour train, then val, then test: stable sort keeps index order.
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap()
    });
    for i in 0..(n - assigned) {
        counts[order[i % 3]] += 1;
    }
    counts
}

fn stratum_rng(seed: u64, stratum: (SubDataset, Label, Quality)) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(stratum.0.as_str().as_bytes());
    hasher.update(b"/");
    hasher.update(stratum.1.as_str().as_bytes());
    hasher.update(b"/");
    hasher.update(stratum.2.as_str().as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest[..32]);
    ChaCha20Rng::from_seed(key)
}

/// Splits a manifest into train/val/test at video granularity.
///
/// Videos are grouped into `(sub_dataset, label, quality)` strata; within
/// each stratum they are ordered lexicographically by path, shuffled by a
/// stratum-specific stream derived from `seed`, and apportioned by
/// largest remainder. The result is a pure function of
/// `(manifest, ratios, seed)`.
pub fn split_manifest(
    manifest: &DatasetManifest,
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitAssignment> {
    ratios.validate()?;
    if manifest.is_empty() {
        return Err(DatasetError::EmptyManifest);
    }
    manifest.check_unique_ids()?;

    let mut strata: BTreeMap<(SubDataset, Label, Quality), Vec<usize>> = BTreeMap::new();
    for (i, r) in manifest.records.iter().enumerate() {
        strata.entry(r.stratum()).or_default().push(i);
    }

    let mut by_record: Vec<Option<SplitClass>> = vec![None; manifest.len()];
    for (stratum, mut members) in strata {
        if members.len() < 3 {
            let name = format!("{}/{}/{}", stratum.0, stratum.1, stratum.2);
            return Err(DatasetError::StratumTooSmall(name, members.len()));
        }
        members.sort_by(|&a, &b| manifest.records[a].path.cmp(&manifest.records[b].path));
        let mut rng = stratum_rng(seed, stratum);
        members.shuffle(&mut rng);
        let counts = apportion(members.len(), &ratios);
        let mut cursor = 0usize;
        for (class, count) in SplitClass::ALL.iter().zip(counts) {
            for &record_idx in &members[cursor..cursor + count] {
                by_record[record_idx] = Some(*class);
            }
            cursor += count;
        }
    }

    let assignments = manifest
        .records
        .iter()
        .zip(by_record)
        .map(|(r, c)| (r.video_id.clone(), c.expect("total assignment")))
        .collect();
    Ok(SplitAssignment::new(assignments, seed, ratios))
}
