//! Measurement protocols: per-frame accuracy with video-level
//! aggregation, the compression-mismatch and cross-dataset condition
//! matrices, the unseen-generator scenario, and report rendering.

mod matrix;
mod render;
mod report;

pub use matrix::{
    condition_matrix_from, run_condition_matrix, run_unseen_generator_eval, ConditionMatrix,
    MatrixSpec,
};
pub use render::{parse_matrix_csv, render_eval_report, render_matrix, ReportFormat};
pub use report::{aggregate_video, evaluate, AggregationPolicy, BreakdownRow, EvalOptions, EvalReport, FramePredictor};

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no test videos selected (filter too narrow or empty split)")]
    EmptyTestSet,
    #[error("held-out fake set {0} is empty")]
    EmptyHeldout(String),
    #[error("empty prediction list")]
    EmptyPredictions,
    #[error("split assignment required when filtering by split class")]
    MissingAssignment,
    #[error("video {video_id}: {source}")]
    Video {
        video_id: String,
        #[source]
        source: crate::media::MediaError,
    },
    #[error("matrix cell ({row}, {col}): {reason}")]
    Cell {
        row: String,
        col: String,
        reason: String,
    },
    #[error("matrix is not rectangular: {0}")]
    RaggedMatrix(String),
    #[error("csv parse error at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Media(#[from] crate::media::MediaError),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Frame-level confusion counts; fake is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Plain accuracy in percent.
    pub fn accuracy(&self) -> f64 {
        100.0 * (self.tp + self.tn) as f64 / self.total() as f64
    }

    pub fn record(&mut self, actual_fake: bool, predicted_fake: bool) {
        match (actual_fake, predicted_fake) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    /// Commutative merge; evaluation reduces per-video counts with it.
    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_is_identity_over_counts() {
        let c = ConfusionCounts {
            tp: 891,
            tn: 900,
            fp: 0,
            fn_: 9,
        };
        assert_eq!(c.total(), 1800);
        assert!((c.accuracy() - 99.5).abs() < 1e-12);
    }

    #[test]
    fn balanced_constant_predictor_scores_exactly_fifty() {
        let mut c = ConfusionCounts::default();
        for i in 0..900 {
            // Constant "real" verdict on a balanced stream.
            c.record(i % 2 == 0, false);
        }
        assert_eq!(c.accuracy(), 50.0);
        assert_eq!(format!("{:.2}", c.accuracy()), "50.00");
    }

    #[test]
    fn merge_is_commutative() {
        let a = ConfusionCounts { tp: 1, tn: 2, fp: 3, fn_: 4 };
        let b = ConfusionCounts { tp: 10, tn: 20, fp: 30, fn_: 40 };
        let mut ab = a;
        ab.merge(&b);
        let mut ba = b;
        ba.merge(&a);
        assert_eq!(ab, ba);
    }
}
