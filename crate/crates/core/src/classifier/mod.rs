//! The "small model": a multiclass linear classifier over tf-idf token
//! features.
//!
//! Training minimizes L2-regularized multinomial cross-entropy by full-batch
//! gradient descent from a zero initialization, so it is deterministic without
//! any seed plumbing. Prediction emits the full per-label softmax
//! distribution, the argmax label, and its probability as the confidence —
//! the score/confidence contract every downstream stage consumes.

pub mod features;
pub mod tokenizer;

pub use features::{FeatureVector, Vocabulary};
pub use tokenizer::{tokenize, TokenSequence};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{LabeledExample, TacticLabel};

/// Training hyperparameters for the small model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Full-batch gradient steps.
    pub epochs: usize,
    pub learning_rate: f64,
    /// L2 penalty on the weight matrix (biases are not penalized).
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            epochs: 300,
            learning_rate: 1.0,
            l2: 1e-4,
        }
    }
}

/// Per-label probabilities for one input.
///
/// `scores` is indexed by [`TacticLabel::index`]; it sums to 1 within 1e-9.
/// `label` is the argmax (ties broken by the first label in canonical order)
/// and `confidence` its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub scores: Vec<f64>,
    pub label: TacticLabel,
    pub confidence: f64,
}

impl Prediction {
    pub fn score(&self, label: TacticLabel) -> f64 {
        self.scores[label.index()]
    }
}

/// Errors from model training.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training set must cover at least 2 distinct labels, found {found}")]
    TooFewLabels { found: usize },
    #[error("training corpus tokenized to an empty vocabulary")]
    EmptyVocabulary,
}

/// A trained classifier: frozen vocabulary plus one coefficient vector and
/// bias per label in the universe.
///
/// Labels absent from the training set keep a coefficient row (gradient
/// descent drives their probability toward zero), so every prediction is a
/// distribution over the full six-label universe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallModel {
    vocabulary: Vocabulary,
    /// `weights[label][term]`, indexed by [`TacticLabel::index`].
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    label_order: Vec<TacticLabel>,
}

impl SmallModel {
    /// Train on labeled examples. Deterministic: identical inputs and config
    /// produce bit-identical models.
    pub fn train(
        train_set: &[LabeledExample],
        config: &TrainConfig,
    ) -> Result<SmallModel, TrainError> {
        if train_set.is_empty() {
            return Err(TrainError::EmptyTrainingSet);
        }
        let mut label_seen = [false; TacticLabel::COUNT];
        for example in train_set {
            label_seen[example.label.index()] = true;
        }
        let distinct = label_seen.iter().filter(|&&s| s).count();
        if distinct < 2 {
            return Err(TrainError::TooFewLabels { found: distinct });
        }

        let docs: Vec<TokenSequence> =
            train_set.iter().map(|e| tokenize(&e.code)).collect();
        let vocabulary = Vocabulary::build(&docs);
        if vocabulary.is_empty() {
            return Err(TrainError::EmptyVocabulary);
        }
        let xs: Vec<FeatureVector> = docs.iter().map(|d| vocabulary.vectorize(d)).collect();
        let ys: Vec<usize> = train_set.iter().map(|e| e.label.index()).collect();

        let n_labels = TacticLabel::COUNT;
        let n_terms = vocabulary.len();
        let mut weights = vec![vec![0.0; n_terms]; n_labels];
        let mut biases = vec![0.0; n_labels];
        for _ in 0..config.epochs {
            let (grad_w, grad_b) = cross_entropy_gradient(&xs, &ys, &weights, &biases, config.l2);
            for (row, grad_row) in weights.iter_mut().zip(&grad_w) {
                for (w, g) in row.iter_mut().zip(grad_row) {
                    *w -= config.learning_rate * g;
                }
            }
            for (b, g) in biases.iter_mut().zip(&grad_b) {
                *b -= config.learning_rate * g;
            }
        }

        Ok(SmallModel {
            vocabulary,
            weights,
            biases,
            label_order: TacticLabel::ALL.to_vec(),
        })
    }

    /// tf-idf vector of a snippet under the model's frozen vocabulary.
    pub fn featurize(&self, code: &str) -> FeatureVector {
        self.vocabulary.vectorize(&tokenize(code))
    }

    /// Classify one snippet. Out-of-vocabulary-only input yields the
    /// bias-driven distribution — still a valid prediction.
    pub fn predict(&self, code: &str) -> Prediction {
        let x = self.featurize(code);
        let logits: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(row, b)| x.entries().map(|(i, w)| row[i as usize] * w).sum::<f64>() + b)
            .collect();
        let scores = softmax(&logits);
        let (label, confidence) = argmax(&scores);
        Prediction {
            scores,
            label,
            confidence,
        }
    }

    /// Classify a batch, in input order. Runs data-parallel when the
    /// `parallel` feature is enabled; results are identical either way.
    pub fn predict_batch(&self, codes: &[&str]) -> Vec<Prediction> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            codes.par_iter().map(|code| self.predict(code)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.predict_batch_sequential(codes)
        }
    }

    /// Sequential twin of [`SmallModel::predict_batch`], always available for
    /// comparison runs and benchmarks.
    pub fn predict_batch_sequential(&self, codes: &[&str]) -> Vec<Prediction> {
        codes.iter().map(|code| self.predict(code)).collect()
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn label_order(&self) -> &[TacticLabel] {
        &self.label_order
    }
}

/// Numerically stable softmax (max-subtracted).
fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// First index of the maximum score, mapped to its label.
fn argmax(scores: &[f64]) -> (TacticLabel, f64) {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    (
        TacticLabel::from_index(best).expect("scores align with the label universe"),
        scores[best],
    )
}

/// L2-regularized multinomial cross-entropy over a dataset.
///
/// Public together with [`cross_entropy_gradient`] so tests can check the
/// analytic gradient against finite differences.
pub fn cross_entropy_loss(
    xs: &[FeatureVector],
    ys: &[usize],
    weights: &[Vec<f64>],
    biases: &[f64],
    l2: f64,
) -> f64 {
    let n = xs.len() as f64;
    let mut loss = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let probs = softmax(&logits_of(x, weights, biases));
        loss -= probs[y].max(f64::MIN_POSITIVE).ln();
    }
    let penalty: f64 = weights
        .iter()
        .flat_map(|row| row.iter().map(|w| w * w))
        .sum();
    loss / n + 0.5 * l2 * penalty
}

/// Analytic gradient of [`cross_entropy_loss`] in (weights, biases) layout.
pub fn cross_entropy_gradient(
    xs: &[FeatureVector],
    ys: &[usize],
    weights: &[Vec<f64>],
    biases: &[f64],
    l2: f64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = xs.len() as f64;
    let n_labels = weights.len();
    let n_terms = weights.first().map_or(0, Vec::len);
    let mut grad_w = vec![vec![0.0; n_terms]; n_labels];
    let mut grad_b = vec![0.0; n_labels];
    for (x, &y) in xs.iter().zip(ys) {
        let probs = softmax(&logits_of(x, weights, biases));
        for (label, &p) in probs.iter().enumerate() {
            let residual = p - f64::from(u8::from(label == y));
            grad_b[label] += residual / n;
            for (i, w) in x.entries() {
                grad_w[label][i as usize] += residual * w / n;
            }
        }
    }
    for (grad_row, row) in grad_w.iter_mut().zip(weights) {
        for (g, w) in grad_row.iter_mut().zip(row) {
            *g += l2 * w;
        }
    }
    (grad_w, grad_b)
}

fn logits_of(x: &FeatureVector, weights: &[Vec<f64>], biases: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .zip(biases)
        .map(|(row, b)| x.entries().map(|(i, w)| row[i as usize] * w).sum::<f64>() + b)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    use std::collections::BTreeMap;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn example(id: &str, code: &str, label: TacticLabel) -> LabeledExample {
        LabeledExample {
            id: id.to_owned(),
            code: code.to_owned(),
            label,
            split: None,
        }
    }

    /// Three-label corpus with disjoint marker identifiers.
    fn toy_corpus() -> Vec<LabeledExample> {
        let mut out = Vec::new();
        let markers = [
            (TacticLabel::Audit, "auditTrail logEvent"),
            (TacticLabel::Heartbeat, "heartbeatTimer sendPulse"),
            (TacticLabel::Pooling, "connectionPool acquireHandle"),
        ];
        for (label, marker) in markers {
            for i in 0..8 {
                let code = format!("class W{i} {{ void run() {{ {marker}.touch({i}); }} }}");
                out.push(example(&format!("{label}-{i}"), &code, label));
            }
        }
        out
    }

    #[test]
    fn toy_corpus_heldout_marker_is_recognized() {
        let model = SmallModel::train(&toy_corpus(), &TrainConfig::default()).unwrap();
        let p = model.predict("class Q { void go() { heartbeatTimer.touch(99); } }");
        assert_eq!(p.label, TacticLabel::Heartbeat);
        assert!(p.confidence > 0.5, "confidence {}", p.confidence);
    }

    #[test]
    fn training_snippets_get_their_own_labels() {
        let corpus = toy_corpus();
        let model = SmallModel::train(&corpus, &TrainConfig::default()).unwrap();
        for e in &corpus {
            assert_eq!(model.predict(&e.code).label, e.label, "example {}", e.id);
        }
    }

    #[test]
    fn train_rejects_degenerate_sets() {
        assert_eq!(
            SmallModel::train(&[], &TrainConfig::default()),
            Err(TrainError::EmptyTrainingSet)
        );
        let single = vec![
            example("a", "auditTrail", TacticLabel::Audit),
            example("b", "auditLog", TacticLabel::Audit),
        ];
        assert_eq!(
            SmallModel::train(&single, &TrainConfig::default()),
            Err(TrainError::TooFewLabels { found: 1 })
        );
        let no_tokens = vec![
            example("a", "___", TacticLabel::Audit),
            example("b", "___", TacticLabel::Pooling),
        ];
        assert_eq!(
            SmallModel::train(&no_tokens, &TrainConfig::default()),
            Err(TrainError::EmptyVocabulary)
        );
    }

    #[test]
    fn retraining_is_bit_deterministic() {
        let corpus = toy_corpus();
        let a = SmallModel::train(&corpus, &TrainConfig::default()).unwrap();
        let b = SmallModel::train(&corpus, &TrainConfig::default()).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn serde_round_trip_predicts_identically() {
        let model = SmallModel::train(&toy_corpus(), &TrainConfig::default()).unwrap();
        let restored: SmallModel =
            serde_json::from_str(&serde_json::to_string(&model).unwrap()).unwrap();
        for code in [
            "auditTrail.log()",
            "heartbeatTimer hb = new heartbeatTimer();",
            "int unrelatedThing = 3;",
            "",
        ] {
            let a = model.predict(code);
            let b = restored.predict(code);
            assert_eq!(a.scores, b.scores);
            assert_eq!(a.label, b.label);
        }
    }

    #[test]
    fn equal_scores_tie_break_to_first_label_in_order() {
        // Zero weights and biases: perfectly uniform distribution.
        let model = SmallModel {
            vocabulary: Vocabulary::build(&[tokenize("x")]),
            weights: vec![vec![0.0]; TacticLabel::COUNT],
            biases: vec![0.0; TacticLabel::COUNT],
            label_order: TacticLabel::ALL.to_vec(),
        };
        let p = model.predict("x");
        assert_eq!(p.label, TacticLabel::Audit);
        assert!((p.confidence - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn shifting_all_logits_preserves_the_argmax() {
        let corpus = toy_corpus();
        let mut model = SmallModel::train(&corpus, &TrainConfig::default()).unwrap();
        let before: Vec<TacticLabel> =
            corpus.iter().map(|e| model.predict(&e.code).label).collect();
        for b in &mut model.biases {
            *b += 17.5;
        }
        let after: Vec<TacticLabel> =
            corpus.iter().map(|e| model.predict(&e.code).label).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn batch_matches_sequential_and_preserves_order() {
        let model = SmallModel::train(&toy_corpus(), &TrainConfig::default()).unwrap();
        let codes = vec![
            "auditTrail.log()",
            "heartbeatTimer.tick()",
            "connectionPool.acquire()",
            "plain old code",
        ];
        let par = model.predict_batch(&codes);
        let seq = model.predict_batch_sequential(&codes);
        assert_eq!(par, seq);
        assert_eq!(par[0].label, TacticLabel::Audit);
        assert_eq!(par[1].label, TacticLabel::Heartbeat);
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..8 {
            let (xs, ys, mut weights, mut biases, l2) = random_instance(&mut rng);
            let (grad_w, grad_b) = cross_entropy_gradient(&xs, &ys, &weights, &biases, l2);
            let h = 1e-5;
            for label in 0..weights.len() {
                for term in 0..weights[label].len() {
                    let original = weights[label][term];
                    weights[label][term] = original + h;
                    let up = cross_entropy_loss(&xs, &ys, &weights, &biases, l2);
                    weights[label][term] = original - h;
                    let down = cross_entropy_loss(&xs, &ys, &weights, &biases, l2);
                    weights[label][term] = original;
                    assert_close(grad_w[label][term], (up - down) / (2.0 * h));
                }
                let original = biases[label];
                biases[label] = original + h;
                let up = cross_entropy_loss(&xs, &ys, &weights, &biases, l2);
                biases[label] = original - h;
                let down = cross_entropy_loss(&xs, &ys, &weights, &biases, l2);
                biases[label] = original;
                assert_close(grad_b[label], (up - down) / (2.0 * h));
            }
        }
    }

    fn assert_close(analytic: f64, numeric: f64) {
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        assert!(
            rel <= 1e-5,
            "gradient mismatch: analytic {analytic}, numeric {numeric}, rel {rel}"
        );
    }

    /// A small random dataset plus random parameters for gradient checks.
    #[allow(clippy::type_complexity)]
    fn random_instance(
        rng: &mut ChaCha20Rng,
    ) -> (Vec<FeatureVector>, Vec<usize>, Vec<Vec<f64>>, Vec<f64>, f64) {
        let n_terms = rng.gen_range(3..8);
        let n_docs = rng.gen_range(2..6);
        let xs: Vec<FeatureVector> = (0..n_docs)
            .map(|_| {
                let mut entries = BTreeMap::new();
                for i in 0..n_terms {
                    if rng.gen_bool(0.6) {
                        entries.insert(i as u32, rng.gen_range(0.05..1.0));
                    }
                }
                FeatureVector::from_entries(entries)
            })
            .collect();
        let ys: Vec<usize> = (0..n_docs)
            .map(|_| rng.gen_range(0..TacticLabel::COUNT))
            .collect();
        let weights: Vec<Vec<f64>> = (0..TacticLabel::COUNT)
            .map(|_| (0..n_terms).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let biases: Vec<f64> = (0..TacticLabel::COUNT)
            .map(|_| rng.gen_range(-0.5..0.5))
            .collect();
        (xs, ys, weights, biases, 0.01)
    }

    fn shared_toy_model() -> &'static SmallModel {
        static MODEL: std::sync::OnceLock<SmallModel> = std::sync::OnceLock::new();
        MODEL.get_or_init(|| SmallModel::train(&toy_corpus(), &TrainConfig::default()).unwrap())
    }

    proptest! {
        #[test]
        fn predictions_are_valid_distributions(code in ".{0,80}") {
            let p = shared_toy_model().predict(&code);
            let sum: f64 = p.scores.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(p.scores.iter().all(|&s| (0.0..=1.0).contains(&s)));
            let max = p.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(p.confidence, max);
            prop_assert_eq!(p.score(p.label), p.confidence);
        }
    }
}
