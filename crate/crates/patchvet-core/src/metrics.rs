//! Evaluation metrics with the overfitting label as the positive class.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::Label;

/// Errors from metric computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricsError {
    LengthMismatch { truths: usize, predictions: usize },
    /// A ground-truth label at this index is `Unlabeled`.
    UnlabeledTruth(usize),
    /// A predicted label at this index is `Unlabeled`.
    UnlabeledPrediction(usize),
    /// A score at this index is NaN or infinite.
    NonFiniteScore(usize),
    /// The confusion matrix holds no outcomes at all.
    EmptyMatrix,
    /// Weighted aggregation got different key sets; payload is one
    /// offending key.
    KeyMismatch(String),
    /// Weighted aggregation got an all-zero weight vector.
    ZeroTotalWeight,
    /// Improvement over a baseline of zero (or less) is undefined.
    ZeroBaseline,
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::LengthMismatch {
                truths,
                predictions,
            } => write!(f, "{truths} truths but {predictions} predictions"),
            MetricsError::UnlabeledTruth(index) => {
                write!(f, "ground truth at index {index} is unlabeled")
            }
            MetricsError::UnlabeledPrediction(index) => {
                write!(f, "prediction at index {index} is unlabeled")
            }
            MetricsError::NonFiniteScore(index) => {
                write!(f, "score at index {index} is not finite")
            }
            MetricsError::EmptyMatrix => write!(f, "confusion matrix is empty"),
            MetricsError::KeyMismatch(key) => {
                write!(f, "values and weights disagree on key {key:?}")
            }
            MetricsError::ZeroTotalWeight => write!(f, "weights sum to zero"),
            MetricsError::ZeroBaseline => {
                write!(f, "improvement over a non-positive baseline is undefined")
            }
        }
    }
}

impl core::error::Error for MetricsError {}

/// Outcome counts with overfitting as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionMatrix {
    /// Overfitting patches flagged as overfitting.
    #[cfg_attr(feature = "serde", serde(rename = "tp"))]
    pub true_positive: u64,
    /// Correct patches flagged as overfitting.
    #[cfg_attr(feature = "serde", serde(rename = "fp"))]
    pub false_positive: u64,
    /// Overfitting patches that slipped through as correct.
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub false_negative: u64,
    /// Correct patches recognized as correct.
    #[cfg_attr(feature = "serde", serde(rename = "tn"))]
    pub true_negative: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.true_positive + self.false_positive + self.false_negative + self.true_negative
    }
}

/// Scalar metrics derived from a confusion matrix. Any metric whose
/// denominator is zero is reported as `0.0`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Tallies predictions against ground truth. Both sides must be fully
/// labeled and of equal length.
pub fn confusion(
    truths: &[Label],
    predictions: &[Label],
) -> Result<ConfusionMatrix, MetricsError> {
    if truths.len() != predictions.len() {
        return Err(MetricsError::LengthMismatch {
            truths: truths.len(),
            predictions: predictions.len(),
        });
    }
    let mut matrix = ConfusionMatrix::default();
    for (index, (truth, prediction)) in truths.iter().zip(predictions).enumerate() {
        match (truth, prediction) {
            (Label::Unlabeled, _) => return Err(MetricsError::UnlabeledTruth(index)),
            (_, Label::Unlabeled) => return Err(MetricsError::UnlabeledPrediction(index)),
            (Label::Overfitting, Label::Overfitting) => matrix.true_positive += 1,
            (Label::Overfitting, Label::Correct) => matrix.false_negative += 1,
            (Label::Correct, Label::Overfitting) => matrix.false_positive += 1,
            (Label::Correct, Label::Correct) => matrix.true_negative += 1,
        }
    }
    Ok(matrix)
}

fn ratio(numerator: u64, denominator: u64) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        numerator as f64 / denominator as f64
    }
}

/// Derives accuracy, precision, recall, and F1 from outcome counts.
pub fn metrics_from(matrix: &ConfusionMatrix) -> Result<ClassificationMetrics, MetricsError> {
    if matrix.total() == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let accuracy = ratio(matrix.true_positive + matrix.true_negative, matrix.total());
    let precision = ratio(
        matrix.true_positive,
        matrix.true_positive + matrix.false_positive,
    );
    let recall = ratio(
        matrix.true_positive,
        matrix.true_positive + matrix.false_negative,
    );
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ClassificationMetrics {
        accuracy,
        precision,
        recall,
        f1,
    })
}

/// Of the genuinely correct patches, the fraction the filter lets through:
/// `tn / (tn + fn)`. Zero when no correct patches exist.
pub fn remaining_correct_ratio(matrix: &ConfusionMatrix) -> f64 {
    ratio(
        matrix.true_negative,
        matrix.true_negative + matrix.false_negative,
    )
}

/// Of the overfitting patches, the fraction the filter catches:
/// `tp / (tp + fn)`. Identical to recall; named for the filtering reading.
pub fn filtered_overfitting_ratio(matrix: &ConfusionMatrix) -> f64 {
    ratio(
        matrix.true_positive,
        matrix.true_positive + matrix.false_negative,
    )
}

/// Area under the ROC curve of `scores` against `truths`, where higher
/// scores should mean overfitting: the Mann-Whitney probability
/// `P(score_pos > score_neg) + 0.5 * P(score_pos = score_neg)`, computed
/// exactly by comparing every (positive, negative) pair. Each comparison
/// contributes 0, 0.5, or 1, all exactly representable, so the result is
/// independent of iteration order. Returns `None` when only one class is
/// present.
pub fn auc(scores: &[f64], truths: &[Label]) -> Result<Option<f64>, MetricsError> {
    if scores.len() != truths.len() {
        return Err(MetricsError::LengthMismatch {
            truths: truths.len(),
            predictions: scores.len(),
        });
    }
    for (index, score) in scores.iter().enumerate() {
        if !score.is_finite() {
            return Err(MetricsError::NonFiniteScore(index));
        }
    }
    let mut positive_scores = Vec::new();
    let mut negative_scores = Vec::new();
    for (index, (truth, score)) in truths.iter().zip(scores).enumerate() {
        match truth {
            Label::Overfitting => positive_scores.push(*score),
            Label::Correct => negative_scores.push(*score),
            Label::Unlabeled => return Err(MetricsError::UnlabeledTruth(index)),
        }
    }
    if positive_scores.is_empty() || negative_scores.is_empty() {
        return Ok(None);
    }

    let mut favorable = 0.0f64;
    for positive in &positive_scores {
        for negative in &negative_scores {
            if positive > negative {
                favorable += 1.0;
            } else if positive == negative {
                favorable += 0.5;
            }
        }
    }
    let pairs = positive_scores.len() as f64 * negative_scores.len() as f64;
    Ok(Some(favorable / pairs))
}

/// Weight-averages per-group values (e.g. per-fold accuracy weighted by
/// test-set size). Key sets must match exactly.
pub fn weighted_average(
    values: &BTreeMap<String, f64>,
    weights: &BTreeMap<String, u64>,
) -> Result<f64, MetricsError> {
    for key in values.keys() {
        if !weights.contains_key(key) {
            return Err(MetricsError::KeyMismatch(key.clone()));
        }
    }
    for key in weights.keys() {
        if !values.contains_key(key) {
            return Err(MetricsError::KeyMismatch(key.clone()));
        }
    }
    let total: u64 = weights.values().sum();
    if total == 0 {
        return Err(MetricsError::ZeroTotalWeight);
    }
    let mut accumulated = 0.0;
    for (key, value) in values {
        accumulated += value * weights[key] as f64;
    }
    Ok(accumulated / total as f64)
}

/// Relative improvement of `ours` over `baseline`, as a fraction
/// (`0.05` means five percent better). Undefined for non-positive
/// baselines.
pub fn improvement_ratio(ours: f64, baseline: f64) -> Result<f64, MetricsError> {
    if baseline <= 0.0 {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok((ours - baseline) / baseline)
}
