//! Condition matrices (training condition x testing condition) and the
//! unseen-generator scenario.

use super::report::{evaluate, EvalOptions, EvalReport, FramePredictor};
use super::{EvalError, Result};
use crate::dataset::{
    DatasetManifest, Label, RecordFilter, SplitAssignment, SplitClass, SubDataset,
};
use crate::model::load_network;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Accuracy grid; rows are training conditions, columns test conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionMatrix {
    pub row_axis: String,
    pub col_axis: String,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    /// Percent accuracies, `cells[row][col]`.
    pub cells: Vec<Vec<f64>>,
}

impl ConditionMatrix {
    pub fn validate(&self) -> Result<()> {
        if self.cells.len() != self.rows.len()
            || self.cells.iter().any(|row| row.len() != self.cols.len())
        {
            return Err(EvalError::RaggedMatrix(format!(
                "{} row labels, {} col labels, cell rows {:?}",
                self.rows.len(),
                self.cols.len(),
                self.cells.iter().map(Vec::len).collect::<Vec<_>>()
            )));
        }
        for row in &self.cells {
            for &cell in row {
                if !(0.0..=100.0).contains(&cell) {
                    return Err(EvalError::RaggedMatrix(format!(
                        "cell {cell} outside [0, 100]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn cell(&self, row: &str, col: &str) -> Option<f64> {
        let r = self.rows.iter().position(|x| x == row)?;
        let c = self.cols.iter().position(|x| x == col)?;
        Some(self.cells[r][c])
    }
}

/// On-disk experiment description for [`run_condition_matrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSpec {
    pub manifest: PathBuf,
    pub split: PathBuf,
    /// (row label, checkpoint path) per training condition.
    pub rows: Vec<(String, PathBuf)>,
    /// (column label, test filter) per testing condition.
    pub cols: Vec<(String, RecordFilter)>,
    pub threshold: f32,
}

/// Generic matrix runner over in-memory predictors; every cell is a full
/// [`evaluate`] pass restricted to the column's filter on the test split.
pub fn condition_matrix_from<P: FramePredictor>(
    rows: &[(String, P)],
    cols: &[(String, RecordFilter)],
    manifest: &DatasetManifest,
    assignment: &SplitAssignment,
    threshold: f32,
) -> Result<ConditionMatrix> {
    let mut cells = Vec::with_capacity(rows.len());
    for (row_label, predictor) in rows {
        let mut row = Vec::with_capacity(cols.len());
        for (col_label, filter) in cols {
            let options = EvalOptions {
                threshold,
                split: Some(SplitClass::Test),
                filter: *filter,
            };
            let report =
                evaluate(predictor, manifest, Some(assignment), &options).map_err(|e| {
                    EvalError::Cell {
                        row: row_label.clone(),
                        col: col_label.clone(),
                        reason: e.to_string(),
                    }
                })?;
            row.push(report.frame_accuracy);
        }
        cells.push(row);
    }
    let matrix = ConditionMatrix {
        row_axis: "Training".into(),
        col_axis: "Testing".into(),
        rows: rows.iter().map(|(l, _)| l.clone()).collect(),
        cols: cols.iter().map(|(l, _)| l.clone()).collect(),
        cells,
    };
    matrix.validate()?;
    Ok(matrix)
}

/// Loads the spec's checkpoints and runs the full grid.
pub fn run_condition_matrix(spec: &MatrixSpec) -> Result<ConditionMatrix> {
    let manifest = DatasetManifest::load(&spec.manifest)?;
    let assignment = SplitAssignment::load(&spec.split)?;
    let mut rows = Vec::with_capacity(spec.rows.len());
    for (label, path) in &spec.rows {
        let (network, _meta) = load_network(path).map_err(|e| EvalError::Cell {
            row: label.clone(),
            col: "*".into(),
            reason: format!("checkpoint {}: {e}", path.display()),
        })?;
        rows.push((label.clone(), network));
    }
    condition_matrix_from(&rows, &spec.cols, &manifest, &assignment, spec.threshold)
}

/// Evaluates a detector on fake videos it never saw in training: the
/// held-out sub-dataset's fake class, restricted to the test split.
/// `fake_source` and `real_source` describe the training composition and
/// are recorded as provenance.
pub fn run_unseen_generator_eval(
    predictor: &dyn FramePredictor,
    manifest: &DatasetManifest,
    assignment: &SplitAssignment,
    fake_source: SubDataset,
    real_source: SubDataset,
    heldout_fakes: SubDataset,
    threshold: f32,
) -> Result<EvalReport> {
    let options = EvalOptions {
        threshold,
        split: Some(SplitClass::Test),
        filter: RecordFilter {
            sub_dataset: Some(heldout_fakes),
            label: Some(Label::Fake),
            quality: None,
        },
    };
    let mut report = match evaluate(predictor, manifest, Some(assignment), &options) {
        Err(EvalError::EmptyTestSet) => {
            return Err(EvalError::EmptyHeldout(heldout_fakes.to_string()))
        }
        other => other?,
    };
    report.test_split_id = format!(
        "unseen_generator: trained on {real_source} reals vs {fake_source} fakes, \
         tested on held-out {heldout_fakes} fakes ({})",
        report.test_split_id
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_validation_catches_ragged_and_out_of_range() {
        let mut m = ConditionMatrix {
            row_axis: "Training".into(),
            col_axis: "Testing".into(),
            rows: vec!["RAW".into(), "HQ".into()],
            cols: vec!["RAW".into()],
            cells: vec![vec![99.0], vec![98.0, 97.0]],
        };
        assert!(m.validate().is_err());
        m.cells = vec![vec![99.0], vec![101.0]];
        assert!(m.validate().is_err());
        m.cells = vec![vec![99.0], vec![98.0]];
        assert!(m.validate().is_ok());
        assert_eq!(m.cell("HQ", "RAW"), Some(98.0));
    }
}
