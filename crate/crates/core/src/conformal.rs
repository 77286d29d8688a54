//! Split conformal prediction over the small model's scores.
//!
//! Calibration collects the true-label nonconformity scores (one minus the
//! predicted probability) on a held-out set and takes the ⌈(m+1)(1−α)⌉-th
//! smallest as the threshold. A prediction set then contains every label
//! whose nonconformity is at or below the threshold; under exchangeability
//! it covers the true label with probability at least 1−α. An empty set is
//! replaced by the argmax singleton, with the fallback recorded so
//! evaluation can count how often it fired.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{Prediction, SmallModel};
use crate::corpus::{LabeledExample, TacticLabel};

/// How nonconformity is computed; recorded in persisted calibrators so a
/// future score change cannot silently reinterpret an old threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreKind {
    #[serde(rename = "one-minus-probability")]
    OneMinusProbability,
}

/// Errors from calibration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConformalError {
    #[error("alpha must lie strictly between 0 and 1, got {alpha}")]
    InvalidAlpha { alpha: f64 },
    #[error("calibration set is empty")]
    EmptyCalibrationSet,
}

/// A calibrated nonconformity threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibrator {
    alpha: f64,
    threshold: f64,
    calib_size: usize,
    score_kind: ScoreKind,
}

impl Calibrator {
    /// Configured error rate, exactly as passed to calibration.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Nonconformity quantile; labels scoring at or below it join the set.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Number of calibration scores (m).
    pub fn calib_size(&self) -> usize {
        self.calib_size
    }
}

/// Nonconformity of a candidate label: 1 − predicted probability.
pub fn nonconformity(prediction: &Prediction, candidate: TacticLabel) -> f64 {
    1.0 - prediction.score(candidate)
}

/// Calibrate a threshold from a model and a held-out calibration split.
pub fn calibrate(
    model: &SmallModel,
    calib_set: &[LabeledExample],
    alpha: f64,
) -> Result<Calibrator, ConformalError> {
    let codes: Vec<&str> = calib_set.iter().map(|e| e.code.as_str()).collect();
    let scores: Vec<f64> = model
        .predict_batch(&codes)
        .iter()
        .zip(calib_set)
        .map(|(prediction, example)| nonconformity(prediction, example.label))
        .collect();
    calibrate_from_scores(&scores, alpha)
}

/// Calibrate directly from true-label nonconformity scores.
///
/// The threshold is the k-th smallest score with k = ⌈(m+1)(1−α)⌉ (the
/// finite-sample split-conformal quantile); if k exceeds m the threshold is
/// 1.0 and every label passes.
pub fn calibrate_from_scores(scores: &[f64], alpha: f64) -> Result<Calibrator, ConformalError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ConformalError::InvalidAlpha { alpha });
    }
    if scores.is_empty() {
        return Err(ConformalError::EmptyCalibrationSet);
    }
    let m = scores.len();
    // The 1e-9 nudge keeps binary-representation dust in (m+1)(1−α) from
    // pushing an exact integer rank over the next ceiling (e.g. 20 × 0.95
    // evaluates a hair above 19 and must still rank 19th, not 20th).
    let k = (((m + 1) as f64) * (1.0 - alpha) - 1e-9).ceil().max(1.0) as usize;
    let threshold = if k > m {
        1.0
    } else {
        let mut sorted = scores.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted[k - 1]
    };
    Ok(Calibrator {
        alpha,
        threshold,
        calib_size: m,
        score_kind: ScoreKind::OneMinusProbability,
    })
}

/// A conformal prediction set: member labels in ascending nonconformity
/// order (ties broken by canonical label order), with their scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    labels: Vec<TacticLabel>,
    per_label_scores: Vec<f64>,
    alpha: f64,
    fallback: bool,
}

impl PredictionSet {
    pub fn labels(&self) -> &[TacticLabel] {
        &self.labels
    }

    /// Nonconformity of each member, aligned with [`PredictionSet::labels`].
    pub fn scores(&self) -> &[f64] {
        &self.per_label_scores
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// True when the raw set was empty and the argmax singleton was
    /// substituted.
    pub fn fallback_used(&self) -> bool {
        self.fallback
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, label: TacticLabel) -> bool {
        self.labels.contains(&label)
    }
}

/// All labels within the calibrated threshold; an empty result falls back to
/// the argmax singleton (recorded via [`PredictionSet::fallback_used`]).
pub fn predict_set(calibrator: &Calibrator, prediction: &Prediction) -> PredictionSet {
    let mut set = predict_set_raw(calibrator, prediction);
    if set.is_empty() {
        set.labels.push(prediction.label);
        set.per_label_scores
            .push(nonconformity(prediction, prediction.label));
        set.fallback = true;
    }
    set
}

/// The prediction set before the empty-set fallback; may be empty. Exposed so
/// coverage and nestedness properties can be stated about the raw rule.
pub fn predict_set_raw(calibrator: &Calibrator, prediction: &Prediction) -> PredictionSet {
    // Starting from canonical label order and sorting stably makes the
    // documented tie-break (equal scores keep label order) hold for free.
    let mut members: Vec<(TacticLabel, f64)> = TacticLabel::ALL
        .into_iter()
        .map(|label| (label, nonconformity(prediction, label)))
        .filter(|(_, score)| *score <= calibrator.threshold)
        .collect();
    members.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (labels, per_label_scores) = members.into_iter().unzip();
    PredictionSet {
        labels,
        per_label_scores,
        alpha: calibrator.alpha,
        fallback: false,
    }
}
