//! Per-frame evaluation and video-level aggregation.

use super::{ConfusionCounts, EvalError, Result};
use crate::dataset::{
    DatasetManifest, Label, Quality, RecordFilter, SplitAssignment, SplitClass, SubDataset,
    VideoRecord,
};
use crate::media::{extract_frames, preprocess_frame, FrameTensor};
use crate::model::{predict_frames, FramePrediction, Network, DEFAULT_THRESHOLD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Anything that can score preprocessed frames. The trained network is
/// the production implementation; tests inject scripted predictors.
pub trait FramePredictor: Sync {
    /// (height, width) the predictor expects after preprocessing.
    fn input_dims(&self) -> (usize, usize);

    fn predict(&self, frames: &[FrameTensor], threshold: f32) -> Result<Vec<FramePrediction>>;
}

impl FramePredictor for Network<f32> {
    fn input_dims(&self) -> (usize, usize) {
        (self.config.input_height, self.config.input_width)
    }

    fn predict(&self, frames: &[FrameTensor], threshold: f32) -> Result<Vec<FramePrediction>> {
        Ok(predict_frames(self, frames, threshold)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationPolicy {
    /// Label with the most frame votes; ties go to fake.
    Majority,
    /// Mean `score_fake` thresholded at 0.5.
    MeanScore,
}

impl AggregationPolicy {
    pub fn parse(s: &str) -> Option<AggregationPolicy> {
        match s.to_ascii_lowercase().as_str() {
            "majority" => Some(AggregationPolicy::Majority),
            "mean_score" => Some(AggregationPolicy::MeanScore),
            _ => None,
        }
    }
}

/// Collapses one video's frame predictions into a video label.
pub fn aggregate_video(
    predictions: &[FramePrediction],
    policy: AggregationPolicy,
) -> Result<Label> {
    if predictions.is_empty() {
        return Err(EvalError::EmptyPredictions);
    }
    Ok(match policy {
        AggregationPolicy::Majority => {
            let fake_votes = predictions
                .iter()
                .filter(|p| p.predicted_label == Label::Fake)
                .count();
            if 2 * fake_votes >= predictions.len() {
                Label::Fake
            } else {
                Label::Real
            }
        }
        AggregationPolicy::MeanScore => {
            let mean: f64 = predictions.iter().map(|p| p.score_fake as f64).sum::<f64>()
                / predictions.len() as f64;
            if mean >= 0.5 {
                Label::Fake
            } else {
                Label::Real
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub threshold: f32,
    /// Restrict to one split class (requires an assignment).
    pub split: Option<SplitClass>,
    pub filter: RecordFilter,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            threshold: DEFAULT_THRESHOLD,
            split: Some(SplitClass::Test),
            filter: RecordFilter::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub sub_dataset: SubDataset,
    pub quality: Quality,
    pub frame_counts: ConfusionCounts,
    pub frame_accuracy: f64,
}

/// Evaluation result. Headline accuracies are per-frame; video-level
/// numbers under both aggregation policies ride along.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub frame_counts: ConfusionCounts,
    /// Percent, `100 * (tp + tn) / total`.
    pub frame_accuracy: f64,
    pub video_counts_majority: ConfusionCounts,
    pub video_accuracy_majority: f64,
    pub video_counts_mean_score: ConfusionCounts,
    pub video_accuracy_mean_score: f64,
    pub breakdown: Vec<BreakdownRow>,
    pub video_count: usize,
    pub checkpoint_id: String,
    pub test_split_id: String,
}

struct VideoOutcome {
    stratum: (SubDataset, Quality),
    actual_fake: bool,
    frame_counts: ConfusionCounts,
    majority: Label,
    mean_score: Label,
}

fn evaluate_video(
    predictor: &dyn FramePredictor,
    record: &VideoRecord,
    threshold: f32,
) -> Result<VideoOutcome> {
    let wrap = |source| EvalError::Video {
        video_id: record.video_id.clone(),
        source,
    };
    let (h, w) = predictor.input_dims();
    let raw_frames = extract_frames(record).map_err(wrap)?;
    let tensors: Vec<FrameTensor> = raw_frames
        .iter()
        .map(|f| preprocess_frame(f, h, w))
        .collect::<std::result::Result<_, _>>()
        .map_err(wrap)?;
    let predictions = predictor.predict(&tensors, threshold)?;
    let mut frame_counts = ConfusionCounts::default();
    let actual_fake = record.label == Label::Fake;
    for p in &predictions {
        frame_counts.record(actual_fake, p.predicted_label == Label::Fake);
    }
    Ok(VideoOutcome {
        stratum: (record.sub_dataset, record.quality),
        actual_fake,
        frame_counts,
        majority: aggregate_video(&predictions, AggregationPolicy::Majority)?,
        mean_score: aggregate_video(&predictions, AggregationPolicy::MeanScore)?,
    })
}

/// Scores every frame of every selected video. Videos run in parallel;
/// the reduction is a commutative count merge, so the result does not
/// depend on scheduling or on manifest order.
pub fn evaluate(
    predictor: &dyn FramePredictor,
    manifest: &DatasetManifest,
    assignment: Option<&SplitAssignment>,
    options: &EvalOptions,
) -> Result<EvalReport> {
    let selected: Vec<&VideoRecord> = manifest
        .records
        .iter()
        .filter(|r| options.filter.matches(r))
        .filter(|r| match options.split {
            None => true,
            Some(class) => assignment
                .map(|a| a.class_of(&r.video_id) == Some(class))
                .unwrap_or(false),
        })
        .collect();
    if options.split.is_some() && assignment.is_none() {
        return Err(EvalError::MissingAssignment);
    }
    if selected.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }

    let outcomes: Vec<Result<VideoOutcome>> = selected
        .par_iter()
        .map(|record| evaluate_video(predictor, record, options.threshold))
        .collect();

    let mut frame_counts = ConfusionCounts::default();
    let mut majority_counts = ConfusionCounts::default();
    let mut mean_counts = ConfusionCounts::default();
    let mut strata: std::collections::BTreeMap<(SubDataset, Quality), ConfusionCounts> =
        std::collections::BTreeMap::new();
    let mut videos = 0usize;
    for outcome in outcomes {
        let outcome = outcome?;
        frame_counts.merge(&outcome.frame_counts);
        strata
            .entry(outcome.stratum)
            .or_default()
            .merge(&outcome.frame_counts);
        majority_counts.record(outcome.actual_fake, outcome.majority == Label::Fake);
        mean_counts.record(outcome.actual_fake, outcome.mean_score == Label::Fake);
        videos += 1;
    }

    let breakdown = strata
        .into_iter()
        .map(|((sub_dataset, quality), counts)| BreakdownRow {
            sub_dataset,
            quality,
            frame_counts: counts,
            frame_accuracy: counts.accuracy(),
        })
        .collect();
    Ok(EvalReport {
        frame_counts,
        frame_accuracy: frame_counts.accuracy(),
        video_counts_majority: majority_counts,
        video_accuracy_majority: majority_counts.accuracy(),
        video_counts_mean_score: mean_counts,
        video_accuracy_mean_score: mean_counts.accuracy(),
        breakdown,
        video_count: videos,
        checkpoint_id: String::new(),
        test_split_id: describe_selection(options),
    })
}

fn describe_selection(options: &EvalOptions) -> String {
    let mut parts = Vec::new();
    if let Some(class) = options.split {
        parts.push(class.to_string());
    }
    if let Some(sub) = options.filter.sub_dataset {
        parts.push(format!("sub_dataset={sub}"));
    }
    if let Some(q) = options.filter.quality {
        parts.push(format!("quality={q}"));
    }
    if let Some(l) = options.filter.label {
        parts.push(format!("label={l}"));
    }
    if parts.is_empty() {
        "all".into()
    } else {
        parts.join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prediction(score: f32) -> FramePrediction {
        FramePrediction {
            video_id: "v".into(),
            frame_index: 0,
            score_fake: score,
            predicted_label: crate::model::label_from_score(score, 0.5),
        }
    }

    #[test]
    fn strict_majority_wins() {
        let preds: Vec<_> = (0..30)
            .map(|i| prediction(if i < 16 { 0.9 } else { 0.1 }))
            .collect();
        assert_eq!(
            aggregate_video(&preds, AggregationPolicy::Majority).unwrap(),
            Label::Fake
        );
    }

    #[test]
    fn majority_tie_goes_to_fake() {
        let preds: Vec<_> = (0..30)
            .map(|i| prediction(if i < 15 { 0.9 } else { 0.1 }))
            .collect();
        assert_eq!(
            aggregate_video(&preds, AggregationPolicy::Majority).unwrap(),
            Label::Fake
        );
    }

    #[test]
    fn policies_can_disagree() {
        // Two frames vote fake outright, four vote real, but the two
        // carry extreme scores: majority says real, mean score says fake.
        let scores = [0.99f32, 0.99, 0.4, 0.4, 0.4, 0.4];
        let preds: Vec<_> = scores.iter().map(|&s| prediction(s)).collect();
        let majority = aggregate_video(&preds, AggregationPolicy::Majority).unwrap();
        let mean = aggregate_video(&preds, AggregationPolicy::MeanScore).unwrap();
        let mean_score: f32 = scores.iter().sum::<f32>() / scores.len() as f32;
        assert!(mean_score > 0.5);
        assert_eq!(majority, Label::Real);
        assert_eq!(mean, Label::Fake);
    }

    #[test]
    fn mean_score_below_half_is_real() {
        let preds: Vec<_> = [0.49f32, 0.49].iter().map(|&s| prediction(s)).collect();
        assert_eq!(
            aggregate_video(&preds, AggregationPolicy::MeanScore).unwrap(),
            Label::Real
        );
    }

    #[test]
    fn empty_prediction_list_is_an_error() {
        assert!(matches!(
            aggregate_video(&[], AggregationPolicy::Majority),
            Err(EvalError::EmptyPredictions)
        ));
    }
}
