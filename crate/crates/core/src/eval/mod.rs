//! Scoring detection runs — one-vs-rest precision/recall/F1 with a macro
//! average — plus the prompt-design ablation harness and the chi-square
//! agreement test for human clarity ratings.

mod chi2;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledExample, TacticLabel};
use crate::llm::{Backend, DetectionResult, ParsedLabel};
use crate::pipeline::{run_detection, DetectOptions, ModelContainer, PipelineError};
use crate::promptkit::{PromptVariant, ABLATION_VARIANTS};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("result {input_id} is not in the truth set")]
    UnknownResultId { input_id: String },
    #[error("degenerate contingency table: {reason}")]
    DegenerateTable { reason: String },
    #[error("clarity ratings line {line}: {message}")]
    ClarityParse { line: usize, message: String },
    #[error("duplicate clarity rating for result {result_id} by rater {rater_id}")]
    DuplicateRating {
        result_id: String,
        rater_id: String,
    },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// How unparsed responses enter the confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnparsedPolicy {
    /// Count an unparsed response as a miss for its true label and a false
    /// positive for nothing — the conservative default.
    #[default]
    CountAsMiss,
    /// Exclude unparsed responses from scoring entirely.
    Drop,
}

/// One label's one-vs-rest cell counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
}

impl LabelCounts {
    /// Always equals the number of evaluated examples.
    pub fn total(&self) -> u64 {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }
}

/// One-vs-rest confusion counts over the whole label universe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    per_label: [LabelCounts; TacticLabel::COUNT],
    evaluated: u64,
    unparsed: u64,
    policy: UnparsedPolicy,
}

impl ConfusionCounts {
    pub fn for_label(&self, label: TacticLabel) -> &LabelCounts {
        &self.per_label[label.index()]
    }

    /// Number of results that entered the counts.
    pub fn evaluated(&self) -> u64 {
        self.evaluated
    }

    /// Number of unparsed results encountered (counted or dropped per the
    /// policy).
    pub fn unparsed(&self) -> u64 {
        self.unparsed
    }

    pub fn policy(&self) -> UnparsedPolicy {
        self.policy
    }
}

/// Score results against the truth split under the default conservative
/// unparsed policy.
pub fn score(
    results: &[DetectionResult],
    truth: &[LabeledExample],
) -> Result<ConfusionCounts, EvalError> {
    score_with_policy(results, truth, UnparsedPolicy::CountAsMiss)
}

/// [`score`] with an explicit unparsed policy.
pub fn score_with_policy(
    results: &[DetectionResult],
    truth: &[LabeledExample],
    policy: UnparsedPolicy,
) -> Result<ConfusionCounts, EvalError> {
    let truth_by_id: BTreeMap<&str, TacticLabel> =
        truth.iter().map(|e| (e.id.as_str(), e.label)).collect();
    let mut per_label = [LabelCounts::default(); TacticLabel::COUNT];
    let mut evaluated = 0u64;
    let mut unparsed = 0u64;
    for result in results {
        let true_label = *truth_by_id.get(result.input_id.as_str()).ok_or_else(|| {
            EvalError::UnknownResultId {
                input_id: result.input_id.clone(),
            }
        })?;
        let predicted = match result.parsed_label {
            ParsedLabel::Label(label) => Some(label),
            ParsedLabel::Unparsed => {
                unparsed += 1;
                if policy == UnparsedPolicy::Drop {
                    continue;
                }
                None
            }
        };
        evaluated += 1;
        for label in TacticLabel::ALL {
            let cell = &mut per_label[label.index()];
            match (label == true_label, predicted == Some(label)) {
                (true, true) => cell.true_positives += 1,
                (true, false) => cell.false_negatives += 1,
                (false, true) => cell.false_positives += 1,
                (false, false) => cell.true_negatives += 1,
            }
        }
    }
    Ok(ConfusionCounts {
        per_label,
        evaluated,
        unparsed,
        policy,
    })
}

/// What a metrics row describes: one tactic, or the macro average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum RowLabel {
    Tactic(TacticLabel),
    Average,
}

impl RowLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowLabel::Tactic(label) => label.as_str(),
            RowLabel::Average => "avg",
        }
    }
}

impl fmt::Display for RowLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<RowLabel> for String {
    fn from(value: RowLabel) -> String {
        value.as_str().to_owned()
    }
}

impl TryFrom<String> for RowLabel {
    type Error = crate::corpus::ParseLabelError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        if value.eq_ignore_ascii_case("avg") {
            Ok(RowLabel::Average)
        } else {
            value.parse().map(RowLabel::Tactic)
        }
    }
}

/// Precision/recall/F1 for one row. Values are kept at full precision;
/// report emission rounds to two decimals via [`round_reported`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub label: RowLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricsRow {
    /// Two-decimal copy for report output.
    pub fn rounded(&self) -> MetricsRow {
        MetricsRow {
            label: self.label,
            precision: round_reported(self.precision),
            recall: round_reported(self.recall),
            f1: round_reported(self.f1),
        }
    }
}

/// The two-decimal rounding used for every number a report prints.
pub fn round_reported(value: f64) -> f64 {
    (value * 100.0).round() / 100.0
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(numerator: u64, denominator: u64) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        numerator as f64 / denominator as f64
    }
}

/// Per-label rows in canonical order plus the macro-average row. The
/// average leaves out `unrelated` — the catch-all is not a tactic — unless
/// `include_unrelated_in_avg` says otherwise.
pub fn metrics_with_options(
    counts: &ConfusionCounts,
    include_unrelated_in_avg: bool,
) -> Vec<MetricsRow> {
    let mut rows: Vec<MetricsRow> = TacticLabel::ALL
        .into_iter()
        .map(|label| {
            let cell = counts.for_label(label);
            let precision = ratio(
                cell.true_positives,
                cell.true_positives + cell.false_positives,
            );
            let recall = ratio(
                cell.true_positives,
                cell.true_positives + cell.false_negatives,
            );
            MetricsRow {
                label: RowLabel::Tactic(label),
                precision,
                recall,
                f1: f1_score(precision, recall),
            }
        })
        .collect();
    let averaged: Vec<&MetricsRow> = rows
        .iter()
        .filter(|row| {
            include_unrelated_in_avg || row.label != RowLabel::Tactic(TacticLabel::Unrelated)
        })
        .collect();
    let n = averaged.len() as f64;
    let avg = MetricsRow {
        label: RowLabel::Average,
        precision: averaged.iter().map(|r| r.precision).sum::<f64>() / n,
        recall: averaged.iter().map(|r| r.recall).sum::<f64>() / n,
        f1: averaged.iter().map(|r| r.f1).sum::<f64>() / n,
    };
    rows.push(avg);
    rows
}

/// [`metrics_with_options`] with the default five-tactic average.
pub fn metrics(counts: &ConfusionCounts) -> Vec<MetricsRow> {
    metrics_with_options(counts, false)
}

/// Render rows as the aligned two-decimal table reports print.
pub fn render_metrics_table(rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14}{:>10}{:>8}{:>8}\n",
        "label", "precision", "recall", "f1"
    ));
    for row in rows {
        let rounded = row.rounded();
        out.push_str(&format!(
            "{:<14}{:>10.2}{:>8.2}{:>8.2}\n",
            rounded.label.as_str(),
            rounded.precision,
            rounded.recall,
            rounded.f1
        ));
    }
    out
}

/// The machine-readable evaluation report: rounded rows plus the scoring
/// bookkeeping a reader needs to interpret them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scoring_policy: UnparsedPolicy,
    pub evaluated: u64,
    pub unparsed: u64,
    pub rows: Vec<MetricsRow>,
}

impl EvalReport {
    pub fn new(counts: &ConfusionCounts) -> EvalReport {
        EvalReport {
            scoring_policy: counts.policy(),
            evaluated: counts.evaluated(),
            unparsed: counts.unparsed(),
            rows: metrics(counts).iter().map(MetricsRow::rounded).collect(),
        }
    }

    /// The human-readable rendering of the same rows.
    pub fn render_text(&self) -> String {
        render_metrics_table(&self.rows)
    }
}

// --- Chi-square agreement ---------------------------------------------------

/// Outcome of a Pearson chi-square test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    /// Columns with zero total removed before computing the statistic.
    pub dropped_columns: usize,
}

/// Pearson chi-square over a rectangular count table. Columns whose total
/// is zero are dropped (degrees of freedom adjust accordingly); tables that
/// cannot support the test at all are rejected.
pub fn chi_square(table: &[Vec<u64>]) -> Result<ChiSquareResult, EvalError> {
    let degenerate = |reason: &str| EvalError::DegenerateTable {
        reason: reason.to_owned(),
    };
    if table.len() < 2 {
        return Err(degenerate("fewer than two rows"));
    }
    let width = table[0].len();
    if table.iter().any(|row| row.len() != width) {
        return Err(degenerate("rows have unequal lengths"));
    }
    if width < 2 {
        return Err(degenerate("fewer than two columns"));
    }

    let kept: Vec<usize> =
        (0..width).filter(|&j| table.iter().any(|row| row[j] > 0)).collect();
    let dropped_columns = width - kept.len();
    if kept.len() < 2 {
        return Err(degenerate("fewer than two nonzero columns"));
    }
    let row_sums: Vec<u64> = table
        .iter()
        .map(|row| kept.iter().map(|&j| row[j]).sum())
        .collect();
    if row_sums.iter().any(|&s| s == 0) {
        return Err(degenerate("a row has zero total"));
    }
    let column_sums: Vec<u64> = kept
        .iter()
        .map(|&j| table.iter().map(|row| row[j]).sum())
        .collect();
    let grand_total: u64 = row_sums.iter().sum();

    let mut statistic = 0.0;
    for (row, &row_sum) in table.iter().zip(&row_sums) {
        for (&j, &column_sum) in kept.iter().zip(&column_sums) {
            let expected = row_sum as f64 * column_sum as f64 / grand_total as f64;
            let observed = row[j] as f64;
            statistic += (observed - expected).powi(2) / expected;
        }
    }
    let degrees_of_freedom = (table.len() - 1) * (kept.len() - 1);
    Ok(ChiSquareResult {
        statistic,
        degrees_of_freedom,
        p_value: chi2::chi_square_p_value(statistic, degrees_of_freedom),
        dropped_columns,
    })
}

/// A clarity judgment from the human study design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clarity {
    Clear,
    Neutral,
    Unclear,
}

impl Clarity {
    pub const ALL: [Clarity; 3] = [Clarity::Clear, Clarity::Neutral, Clarity::Unclear];

    fn index(self) -> usize {
        match self {
            Clarity::Clear => 0,
            Clarity::Neutral => 1,
            Clarity::Unclear => 2,
        }
    }
}

/// One rater's clarity judgment of one detection rationale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClarityRating {
    pub result_id: String,
    pub rater_id: String,
    pub rating: Clarity,
}

/// Read line-delimited JSON ratings, rejecting malformed lines and
/// duplicate (result, rater) pairs.
pub fn load_clarity_jsonl(path: &Path) -> Result<Vec<ClarityRating>, EvalError> {
    let data = std::fs::read_to_string(path).map_err(|e| EvalError::ClarityParse {
        line: 0,
        message: e.to_string(),
    })?;
    let mut ratings = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (index, line) in data.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rating: ClarityRating =
            serde_json::from_str(line).map_err(|e| EvalError::ClarityParse {
                line: index + 1,
                message: e.to_string(),
            })?;
        if !seen.insert((rating.result_id.clone(), rating.rater_id.clone())) {
            return Err(EvalError::DuplicateRating {
                result_id: rating.result_id,
                rater_id: rating.rater_id,
            });
        }
        ratings.push(rating);
    }
    Ok(ratings)
}

/// Fold ratings into a raters × {clear, neutral, unclear} count table, rows
/// in rater-id order. At least two raters are required for a contingency.
pub fn clarity_contingency(ratings: &[ClarityRating]) -> Result<Vec<Vec<u64>>, EvalError> {
    let mut by_rater: BTreeMap<&str, [u64; 3]> = BTreeMap::new();
    let mut seen = std::collections::BTreeSet::new();
    for rating in ratings {
        if !seen.insert((rating.result_id.as_str(), rating.rater_id.as_str())) {
            return Err(EvalError::DuplicateRating {
                result_id: rating.result_id.clone(),
                rater_id: rating.rater_id.clone(),
            });
        }
        by_rater.entry(rating.rater_id.as_str()).or_default()[rating.rating.index()] += 1;
    }
    if by_rater.len() < 2 {
        return Err(EvalError::DegenerateTable {
            reason: "fewer than two raters".to_owned(),
        });
    }
    Ok(by_rater.values().map(|row| row.to_vec()).collect())
}

// --- Ablation harness --------------------------------------------------------

/// One variant's scored outcome within an ablation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationVariantReport {
    /// Stable machine name (e.g. `no_cot`).
    pub variant: PromptVariant,
    /// Table heading (e.g. `w/o CoT`).
    pub display_name: String,
    pub evaluated: u64,
    pub unparsed: u64,
    pub rows: Vec<MetricsRow>,
}

/// The five-variant comparison over one fixed test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub test_ids: Vec<String>,
    pub scoring_policy: UnparsedPolicy,
    pub variants: Vec<AblationVariantReport>,
}

impl AblationReport {
    /// Aligned-text rendering: one titled metrics table per variant.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for variant in &self.variants {
            out.push_str(&format!("== {} ==\n", variant.display_name));
            out.push_str(&render_metrics_table(&variant.rows));
            out.push('\n');
        }
        out
    }
}

/// Run every prompt-design variant over the same test set and score each
/// against the same truth. Variants run sequentially; concurrency within a
/// variant belongs to the completion client.
pub fn run_ablation(
    container: &ModelContainer,
    pool: &[LabeledExample],
    test: &[LabeledExample],
    backend: &dyn Backend,
    options: &DetectOptions,
) -> Result<AblationReport, EvalError> {
    let mut variants = Vec::with_capacity(ABLATION_VARIANTS.len());
    for variant in ABLATION_VARIANTS {
        let variant_options = DetectOptions {
            variant,
            ..options.clone()
        };
        let output = run_detection(container, pool, test, backend, &variant_options)?;
        let counts = score(&output.results, test)?;
        variants.push(AblationVariantReport {
            variant,
            display_name: variant.report_name().to_owned(),
            evaluated: counts.evaluated(),
            unparsed: counts.unparsed(),
            rows: metrics(&counts).iter().map(MetricsRow::rounded).collect(),
        });
    }
    Ok(AblationReport {
        test_ids: test.iter().map(|e| e.id.clone()).collect(),
        scoring_policy: UnparsedPolicy::CountAsMiss,
        variants,
    })
}
