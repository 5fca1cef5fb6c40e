//! Report rendering: pipe-separated text for humans, CSV, and
//! line-delimited JSON for machines. Accuracies always print with two
//! decimals.

use super::matrix::ConditionMatrix;
use super::report::EvalReport;
use super::{EvalError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    AlignedText,
    Csv,
    Structured,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<ReportFormat> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "aligned_text" => Some(ReportFormat::AlignedText),
            "csv" => Some(ReportFormat::Csv),
            "structured" | "jsonl" => Some(ReportFormat::Structured),
            _ => None,
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            ReportFormat::AlignedText => "txt",
            ReportFormat::Csv => "csv",
            ReportFormat::Structured => "jsonl",
        }
    }
}

fn pct(v: f64) -> String {
    format!("{v:.2}")
}

pub fn render_matrix(matrix: &ConditionMatrix, format: ReportFormat) -> String {
    match format {
        ReportFormat::AlignedText => {
            let mut out = format!(
                "{}\\{} | {}\n",
                matrix.row_axis,
                matrix.col_axis,
                matrix.cols.join(" | ")
            );
            for (label, row) in matrix.rows.iter().zip(&matrix.cells) {
                let cells: Vec<String> = row.iter().map(|&v| pct(v)).collect();
                out.push_str(&format!("{label} | {}\n", cells.join(" | ")));
            }
            out
        }
        ReportFormat::Csv => {
            let mut out = format!(
                "{}\\{},{}\n",
                matrix.row_axis,
                matrix.col_axis,
                matrix.cols.join(",")
            );
            for (label, row) in matrix.rows.iter().zip(&matrix.cells) {
                let cells: Vec<String> = row.iter().map(|&v| pct(v)).collect();
                out.push_str(&format!("{label},{}\n", cells.join(",")));
            }
            out
        }
        ReportFormat::Structured => {
            let mut out = serde_json::to_string(&serde_json::json!({
                "row_axis": matrix.row_axis,
                "col_axis": matrix.col_axis,
            }))
            .unwrap();
            out.push('\n');
            for (row_label, row) in matrix.rows.iter().zip(&matrix.cells) {
                for (col_label, &value) in matrix.cols.iter().zip(row) {
                    out.push_str(
                        &serde_json::to_string(&serde_json::json!({
                            "row": row_label,
                            "col": col_label,
                            "accuracy": value,
                        }))
                        .unwrap(),
                    );
                    out.push('\n');
                }
            }
            out
        }
    }
}

/// Parses a matrix rendered as CSV; two-decimal cells parse back to the
/// exact rendered values, so render -> parse -> render is idempotent.
pub fn parse_matrix_csv(text: &str) -> Result<ConditionMatrix> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(EvalError::Csv {
        line: 1,
        message: "empty csv".into(),
    })?;
    let mut fields = header.split(',');
    let corner = fields.next().unwrap_or_default();
    let (row_axis, col_axis) = corner.split_once('\\').ok_or(EvalError::Csv {
        line: 1,
        message: format!("corner cell {corner:?} must be RowAxis\\ColAxis"),
    })?;
    let cols: Vec<String> = fields.map(str::to_string).collect();
    if cols.is_empty() {
        return Err(EvalError::Csv {
            line: 1,
            message: "no columns".into(),
        });
    }
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for (idx, line) in lines {
        let mut fields = line.split(',');
        let label = fields.next().unwrap_or_default().to_string();
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>().map_err(|e| EvalError::Csv {
                    line: idx + 1,
                    message: format!("bad cell {f:?}: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != cols.len() {
            return Err(EvalError::Csv {
                line: idx + 1,
                message: format!("expected {} cells, got {}", cols.len(), values.len()),
            });
        }
        rows.push(label);
        cells.push(values);
    }
    let matrix = ConditionMatrix {
        row_axis: row_axis.to_string(),
        col_axis: col_axis.to_string(),
        rows,
        cols,
        cells,
    };
    matrix.validate()?;
    Ok(matrix)
}

pub fn render_eval_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::AlignedText => {
            let mut out = String::new();
            out.push_str("evaluation report (accuracies are per-frame unless marked video)\n");
            out.push_str(&format!("checkpoint: {}\n", report.checkpoint_id));
            out.push_str(&format!("test selection: {}\n", report.test_split_id));
            out.push_str(&format!("videos: {}\n", report.video_count));
            let c = report.frame_counts;
            out.push_str(&format!(
                "frames: {} | tp {} | tn {} | fp {} | fn {}\n",
                c.total(),
                c.tp,
                c.tn,
                c.fp,
                c.fn_
            ));
            out.push_str(&format!("frame accuracy: {}\n", pct(report.frame_accuracy)));
            out.push_str(&format!(
                "video accuracy (majority): {}\n",
                pct(report.video_accuracy_majority)
            ));
            out.push_str(&format!(
                "video accuracy (mean_score): {}\n",
                pct(report.video_accuracy_mean_score)
            ));
            if !report.breakdown.is_empty() {
                out.push_str("sub_dataset | quality | frames | accuracy\n");
                for row in &report.breakdown {
                    out.push_str(&format!(
                        "{} | {} | {} | {}\n",
                        row.sub_dataset,
                        row.quality,
                        row.frame_counts.total(),
                        pct(row.frame_accuracy)
                    ));
                }
            }
            out
        }
        ReportFormat::Csv => {
            let mut out =
                String::from("sub_dataset,quality,frames,tp,tn,fp,fn,accuracy\n");
            for row in &report.breakdown {
                let c = row.frame_counts;
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    row.sub_dataset,
                    row.quality,
                    c.total(),
                    c.tp,
                    c.tn,
                    c.fp,
                    c.fn_,
                    pct(row.frame_accuracy)
                ));
            }
            let c = report.frame_counts;
            out.push_str(&format!(
                "all,all,{},{},{},{},{},{}\n",
                c.total(),
                c.tp,
                c.tn,
                c.fp,
                c.fn_,
                pct(report.frame_accuracy)
            ));
            out
        }
        ReportFormat::Structured => {
            let mut out = serde_json::to_string(report).expect("report serialization");
            out.push('\n');
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Compression-mismatch reference values used by rendering tests.
    pub(crate) fn reference_matrix() -> ConditionMatrix {
        ConditionMatrix {
            row_axis: "Training".into(),
            col_axis: "Testing".into(),
            rows: vec!["RAW".into(), "HQ".into(), "LQ".into()],
            cols: vec!["RAW".into(), "HQ".into(), "LQ".into()],
            cells: vec![
                vec![99.89, 99.90, 95.41],
                vec![100.00, 100.00, 95.72],
                vec![99.70, 99.63, 99.19],
            ],
        }
    }

    #[test]
    fn aligned_text_layout_is_exact() {
        let text = render_matrix(&reference_matrix(), ReportFormat::AlignedText);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "Training\\Testing | RAW | HQ | LQ");
        assert_eq!(lines[1], "RAW | 99.89 | 99.90 | 95.41");
        assert_eq!(lines[3], "LQ | 99.70 | 99.63 | 99.19");
    }

    #[test]
    fn csv_round_trip_is_lossless_and_idempotent() {
        let matrix = reference_matrix();
        let csv = render_matrix(&matrix, ReportFormat::Csv);
        let parsed = parse_matrix_csv(&csv).unwrap();
        assert_eq!(parsed, matrix);
        assert_eq!(render_matrix(&parsed, ReportFormat::Csv), csv);
    }

    #[test]
    fn structured_matrix_has_one_line_per_cell() {
        let text = render_matrix(&reference_matrix(), ReportFormat::Structured);
        assert_eq!(text.lines().count(), 1 + 9);
    }

    #[test]
    fn empty_breakdown_renders_headers_only() {
        let report = EvalReport {
            frame_counts: crate::eval::ConfusionCounts {
                tp: 1,
                tn: 1,
                fp: 0,
                fn_: 0,
            },
            frame_accuracy: 100.0,
            video_counts_majority: Default::default(),
            video_accuracy_majority: 0.0,
            video_counts_mean_score: Default::default(),
            video_accuracy_mean_score: 0.0,
            breakdown: vec![],
            video_count: 0,
            checkpoint_id: "test".into(),
            test_split_id: "all".into(),
        };
        let csv = render_eval_report(&report, ReportFormat::Csv);
        assert_eq!(csv.lines().count(), 2); // header + overall row
        assert!(csv.starts_with("sub_dataset,quality,"));
    }

    #[test]
    fn bad_csv_is_rejected_with_line_numbers() {
        assert!(matches!(
            parse_matrix_csv("Training\\Testing,RAW\nLQ,abc\n"),
            Err(EvalError::Csv { line: 2, .. })
        ));
        assert!(parse_matrix_csv("no-backslash,RAW\n").is_err());
    }
}
