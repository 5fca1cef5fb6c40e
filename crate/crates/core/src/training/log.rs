//! Append-only training log, one JSON record per epoch.

use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: u32,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub entries: Vec<EpochStats>,
}

impl TrainingLog {
    pub fn push(&mut self, stats: EpochStats) {
        self.entries.push(stats);
    }

    pub fn min_val_loss(&self) -> Option<f64> {
        self.entries
            .iter()
            .map(|e| e.val_loss)
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry).expect("epoch stats serialization"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let mut entries = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            entries.push(serde_json::from_str(line)?);
        }
        Ok(TrainingLog { entries })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_jsonl())
    }
}
