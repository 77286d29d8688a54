//! Hybrid code similarity: semantic, lexical, and syntactic signals blended
//! into one score.
//!
//! Three kernels measure different facets of closeness between two snippets:
//!
//! - **semantic**: cosine similarity between tf-idf feature vectors, so
//!   snippets sharing weighted vocabulary score high;
//! - **lexical**: Jaccard overlap of token sets, insensitive to ordering and
//!   repetition;
//! - **syntactic**: normalized edit similarity between preorder node-kind
//!   sequences of the parsed snippets, capturing structural shape.
//!
//! The combined score is a convex combination of the three under
//! [`SimilarityWeights`] (equal thirds by default). Candidate pools are
//! prepared once ([`PreparedPool`]) so repeated queries pay only the scoring
//! cost; with the `parallel` feature both preparation and ranking fan out
//! across a thread pool, with sequential twins always available.

pub mod ast;
pub mod levenshtein;

pub use ast::{parse_ast_sequence, AstSequence, MAX_SEQUENCE_NODES};
pub use levenshtein::levenshtein;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::classifier::{tokenize, FeatureVector, SmallModel};
use crate::corpus::{LabeledExample, TacticLabel};

/// Tolerance when checking that blend weights sum to one.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum SimilarityError {
    #[error(
        "similarity weights must be non-negative and sum to 1 \
         (got semantic={semantic}, lexical={lexical}, syntactic={syntactic})"
    )]
    InvalidWeights {
        semantic: f64,
        lexical: f64,
        syntactic: f64,
    },
    #[error("candidate pool is empty")]
    EmptyPool,
}

/// Blend weights for the three similarity kernels. Must be non-negative and
/// sum to 1 within [`WEIGHT_SUM_TOLERANCE`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights {
    semantic: f64,
    lexical: f64,
    syntactic: f64,
}

impl Default for SimilarityWeights {
    /// Equal thirds.
    fn default() -> SimilarityWeights {
        SimilarityWeights {
            semantic: 1.0 / 3.0,
            lexical: 1.0 / 3.0,
            syntactic: 1.0 / 3.0,
        }
    }
}

impl SimilarityWeights {
    pub fn new(semantic: f64, lexical: f64, syntactic: f64) -> Result<Self, SimilarityError> {
        let weights = SimilarityWeights {
            semantic,
            lexical,
            syntactic,
        };
        weights.validate()?;
        Ok(weights)
    }

    pub fn validate(&self) -> Result<(), SimilarityError> {
        let sum = self.semantic + self.lexical + self.syntactic;
        let valid = self.semantic >= 0.0
            && self.lexical >= 0.0
            && self.syntactic >= 0.0
            && (sum - 1.0).abs() <= WEIGHT_SUM_TOLERANCE;
        if valid {
            Ok(())
        } else {
            Err(SimilarityError::InvalidWeights {
                semantic: self.semantic,
                lexical: self.lexical,
                syntactic: self.syntactic,
            })
        }
    }

    pub fn semantic(&self) -> f64 {
        self.semantic
    }

    pub fn lexical(&self) -> f64 {
        self.lexical
    }

    pub fn syntactic(&self) -> f64 {
        self.syntactic
    }
}

/// Per-kernel scores plus their weighted blend for one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityBreakdown {
    pub semantic: f64,
    pub lexical: f64,
    pub syntactic: f64,
    pub combined: f64,
}

/// Cosine similarity between two feature vectors; zero whenever either
/// vector has zero norm.
pub fn semantic_similarity(a: &FeatureVector, b: &FeatureVector) -> f64 {
    if a.is_zero() || b.is_zero() {
        return 0.0;
    }
    a.dot(b) / (a.norm() * b.norm())
}

/// Jaccard similarity of two sets; two empty sets count as identical.
pub fn lexical_similarity<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let intersection = a.intersection(b).count();
    let union = a.len() + b.len() - intersection;
    intersection as f64 / union as f64
}

/// Normalized edit similarity between node-kind sequences:
/// `1 - distance / max(len)`, with two empty sequences counting as identical.
pub fn syntactic_similarity(a: &AstSequence, b: &AstSequence) -> f64 {
    let (ka, kb) = (a.node_kinds(), b.node_kinds());
    if ka.is_empty() && kb.is_empty() {
        return 1.0;
    }
    let distance = levenshtein(ka, kb);
    1.0 - distance as f64 / ka.len().max(kb.len()) as f64
}

/// Convex combination of the three kernel scores.
pub fn combined_score(
    weights: &SimilarityWeights,
    semantic: f64,
    lexical: f64,
    syntactic: f64,
) -> f64 {
    weights.semantic * semantic + weights.lexical * lexical + weights.syntactic * syntactic
}

/// A query snippet with all three representations precomputed.
#[derive(Debug, Clone)]
pub struct PreparedQuery {
    vector: FeatureVector,
    token_set: BTreeSet<String>,
    ast: AstSequence,
}

impl PreparedQuery {
    pub fn prepare(model: &SmallModel, source_id: &str, code: &str) -> PreparedQuery {
        let tokens = tokenize(code);
        PreparedQuery {
            vector: model.featurize(code),
            token_set: tokens.tokens().iter().cloned().collect(),
            ast: parse_ast_sequence(source_id, code),
        }
    }

    pub fn ast(&self) -> &AstSequence {
        &self.ast
    }
}

/// One pool candidate with all three representations precomputed.
#[derive(Debug, Clone)]
pub struct PreparedExample {
    example: LabeledExample,
    vector: FeatureVector,
    token_set: BTreeSet<String>,
    ast: AstSequence,
}

impl PreparedExample {
    fn prepare(model: &SmallModel, example: &LabeledExample) -> PreparedExample {
        let tokens = tokenize(&example.code);
        PreparedExample {
            vector: model.featurize(&example.code),
            token_set: tokens.tokens().iter().cloned().collect(),
            ast: parse_ast_sequence(&example.id, &example.code),
            example: example.clone(),
        }
    }

    pub fn example(&self) -> &LabeledExample {
        &self.example
    }

    pub fn ast(&self) -> &AstSequence {
        &self.ast
    }

    fn score(&self, query: &PreparedQuery, weights: &SimilarityWeights) -> SimilarityBreakdown {
        let semantic = semantic_similarity(&query.vector, &self.vector);
        let lexical = lexical_similarity(&query.token_set, &self.token_set);
        let syntactic = syntactic_similarity(&query.ast, &self.ast);
        SimilarityBreakdown {
            semantic,
            lexical,
            syntactic,
            combined: combined_score(weights, semantic, lexical, syntactic),
        }
    }
}

/// A scored candidate returned by ranking.
#[derive(Debug, Clone)]
pub struct RankedMatch<'p> {
    entry: &'p PreparedExample,
    breakdown: SimilarityBreakdown,
}

impl<'p> RankedMatch<'p> {
    pub fn example(&self) -> &'p LabeledExample {
        self.entry.example()
    }

    pub fn breakdown(&self) -> &SimilarityBreakdown {
        &self.breakdown
    }
}

/// A candidate pool with per-example representations computed up front.
#[derive(Debug, Clone)]
pub struct PreparedPool {
    entries: Vec<PreparedExample>,
}

impl PreparedPool {
    /// Prepare every pool example. Errors on an empty pool: ranking against
    /// nothing is always a caller bug.
    pub fn prepare(
        model: &SmallModel,
        examples: &[LabeledExample],
    ) -> Result<PreparedPool, SimilarityError> {
        if examples.is_empty() {
            return Err(SimilarityError::EmptyPool);
        }
        #[cfg(feature = "parallel")]
        let entries = {
            use rayon::prelude::*;
            examples
                .par_iter()
                .map(|example| PreparedExample::prepare(model, example))
                .collect()
        };
        #[cfg(not(feature = "parallel"))]
        let entries = examples
            .iter()
            .map(|example| PreparedExample::prepare(model, example))
            .collect();
        Ok(PreparedPool { entries })
    }

    /// Single-threaded twin of [`PreparedPool::prepare`].
    pub fn prepare_sequential(
        model: &SmallModel,
        examples: &[LabeledExample],
    ) -> Result<PreparedPool, SimilarityError> {
        if examples.is_empty() {
            return Err(SimilarityError::EmptyPool);
        }
        Ok(PreparedPool {
            entries: examples
                .iter()
                .map(|example| PreparedExample::prepare(model, example))
                .collect(),
        })
    }

    pub fn entries(&self) -> &[PreparedExample] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All candidates scored against the query, most similar first; ties
    /// break toward the lexically smaller example id so ranking is total.
    pub fn rank<'p>(
        &'p self,
        query: &PreparedQuery,
        weights: &SimilarityWeights,
    ) -> Vec<RankedMatch<'p>> {
        #[cfg(feature = "parallel")]
        let scored: Vec<RankedMatch<'p>> = {
            use rayon::prelude::*;
            self.entries
                .par_iter()
                .map(|entry| RankedMatch {
                    entry,
                    breakdown: entry.score(query, weights),
                })
                .collect()
        };
        #[cfg(not(feature = "parallel"))]
        let scored: Vec<RankedMatch<'p>> = self
            .entries
            .iter()
            .map(|entry| RankedMatch {
                entry,
                breakdown: entry.score(query, weights),
            })
            .collect();
        sort_matches(scored)
    }

    /// Single-threaded twin of [`PreparedPool::rank`].
    pub fn rank_sequential<'p>(
        &'p self,
        query: &PreparedQuery,
        weights: &SimilarityWeights,
    ) -> Vec<RankedMatch<'p>> {
        let scored = self
            .entries
            .iter()
            .map(|entry| RankedMatch {
                entry,
                breakdown: entry.score(query, weights),
            })
            .collect();
        sort_matches(scored)
    }

    /// Ranking restricted to candidates carrying one label.
    pub fn rank_label<'p>(
        &'p self,
        query: &PreparedQuery,
        weights: &SimilarityWeights,
        label: TacticLabel,
    ) -> Vec<RankedMatch<'p>> {
        let scored = self
            .entries
            .iter()
            .filter(|entry| entry.example.label == label)
            .map(|entry| RankedMatch {
                entry,
                breakdown: entry.score(query, weights),
            })
            .collect();
        sort_matches(scored)
    }
}

fn sort_matches(mut matches: Vec<RankedMatch<'_>>) -> Vec<RankedMatch<'_>> {
    matches.sort_by(|x, y| {
        y.breakdown
            .combined
            .total_cmp(&x.breakdown.combined)
            .then_with(|| x.entry.example.id.cmp(&y.entry.example.id))
    });
    matches
}

/// Score every pool candidate against a query snippet and rank them, most
/// similar first.
pub fn rank_candidates<'p>(
    model: &SmallModel,
    query_code: &str,
    pool: &'p PreparedPool,
    weights: &SimilarityWeights,
) -> Vec<RankedMatch<'p>> {
    let query = PreparedQuery::prepare(model, "query", query_code);
    pool.rank(&query, weights)
}

/// Breakdown between two standalone snippets, for inspection tooling.
pub fn explain(
    model: &SmallModel,
    weights: &SimilarityWeights,
    query_code: &str,
    candidate_code: &str,
) -> SimilarityBreakdown {
    let query = PreparedQuery::prepare(model, "query", query_code);
    let candidate = LabeledExample {
        id: "candidate".to_owned(),
        code: candidate_code.to_owned(),
        label: TacticLabel::Unrelated,
        split: None,
    };
    let prepared = PreparedExample::prepare(model, &candidate);
    prepared.score(&query, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::TrainConfig;
    use crate::corpus::Corpus;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    const TIGHT: f64 = 1e-12;

    fn vector(entries: &[(u32, f64)]) -> FeatureVector {
        FeatureVector::from_entries(entries.iter().copied().collect::<BTreeMap<u32, f64>>())
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| (*s).to_owned()).collect()
    }

    fn seq(kinds: &[&str]) -> AstSequence {
        AstSequence::from_kinds("test", kinds)
    }

    #[test]
    fn cosine_of_unit_x_with_diagonal_is_inverse_root_two() {
        let a = vector(&[(0, 1.0)]);
        let b = vector(&[(0, 1.0), (1, 1.0)]);
        let got = semantic_similarity(&a, &b);
        assert!((got - 0.707_106_781_186_547_5).abs() <= TIGHT, "got {got}");
    }

    #[test]
    fn cosine_handles_zero_identical_and_orthogonal_vectors() {
        let zero = vector(&[]);
        let a = vector(&[(0, 2.0), (3, 1.0)]);
        let b = vector(&[(1, 5.0)]);
        assert_eq!(semantic_similarity(&zero, &a), 0.0);
        assert_eq!(semantic_similarity(&a, &zero), 0.0);
        assert_eq!(semantic_similarity(&zero, &zero), 0.0);
        assert!((semantic_similarity(&a, &a) - 1.0).abs() <= TIGHT);
        assert_eq!(semantic_similarity(&a, &b), 0.0);
    }

    #[test]
    fn jaccard_matches_hand_computed_overlap()  {
        let a = set(&["a", "b", "c"]);
        let b = set(&["b", "c", "d"]);
        assert!((lexical_similarity(&a, &b) - 0.5).abs() <= TIGHT);
        assert_eq!(lexical_similarity(&a, &a), 1.0);
        assert_eq!(lexical_similarity(&a, &set(&["x"])), 0.0);
        assert_eq!(
            lexical_similarity::<String>(&BTreeSet::new(), &BTreeSet::new()),
            1.0
        );
        assert_eq!(lexical_similarity(&BTreeSet::new(), &a), 0.0);
    }

    #[test]
    fn edit_similarity_matches_hand_computed_distance() {
        let a = seq(&["a", "b", "c"]);
        let b = seq(&["a", "x", "c"]);
        let got = syntactic_similarity(&a, &b);
        assert!((got - 2.0 / 3.0).abs() <= TIGHT, "got {got}");
        assert_eq!(syntactic_similarity(&a, &a), 1.0);
        assert_eq!(syntactic_similarity(&seq(&[]), &seq(&[])), 1.0);
        assert_eq!(syntactic_similarity(&seq(&[]), &a), 0.0);
    }

    #[test]
    fn combined_with_equal_weights_is_the_mean() {
        let weights = SimilarityWeights::default();
        let got = combined_score(&weights, 0.9, 0.6, 0.3);
        assert!((got - 0.6).abs() <= TIGHT, "got {got}");
    }

    #[test]
    fn projection_weights_select_one_kernel() {
        let weights = SimilarityWeights::new(1.0, 0.0, 0.0).unwrap();
        assert_eq!(combined_score(&weights, 0.9, 0.6, 0.3), 0.9);
        let weights = SimilarityWeights::new(0.0, 0.0, 1.0).unwrap();
        assert_eq!(combined_score(&weights, 0.9, 0.6, 0.3), 0.3);
    }

    #[test]
    fn invalid_weights_are_rejected() {
        assert!(matches!(
            SimilarityWeights::new(0.5, 0.5, 0.5),
            Err(SimilarityError::InvalidWeights { .. })
        ));
        assert!(matches!(
            SimilarityWeights::new(-0.2, 0.6, 0.6),
            Err(SimilarityError::InvalidWeights { .. })
        ));
        assert!(SimilarityWeights::default().validate().is_ok());
        assert!(SimilarityWeights::new(0.5, 0.3, 0.2).is_ok());
    }

    fn toy_corpus() -> Corpus {
        let mut examples = Vec::new();
        let snippets: &[(&str, TacticLabel)] = &[
            (
                "class AuditLog { void record(String event) { trail.append(event); } }",
                TacticLabel::Audit,
            ),
            (
                "class AuditSink { void write(String entry) { trail.store(entry); } }",
                TacticLabel::Audit,
            ),
            (
                "class Heartbeat { void beat() { monitor.ping(); } }",
                TacticLabel::Heartbeat,
            ),
            (
                "class PulseTimer { void tick() { monitor.pulse(); } }",
                TacticLabel::Heartbeat,
            ),
            (
                "class PoolManager { Connection acquire() { return pool.take(); } }",
                TacticLabel::Pooling,
            ),
            (
                "class HandleCache { Connection lease() { return pool.borrow(); } }",
                TacticLabel::Pooling,
            ),
        ];
        for (i, (code, label)) in snippets.iter().enumerate() {
            examples.push(LabeledExample {
                id: format!("ex-{i:02}"),
                code: (*code).to_owned(),
                label: *label,
                split: None,
            });
        }
        Corpus::from_examples(examples).unwrap()
    }

    fn toy_model(corpus: &Corpus) -> SmallModel {
        SmallModel::train(corpus.examples(), &TrainConfig::default()).unwrap()
    }

    #[test]
    fn a_pool_member_ranks_itself_first() {
        let corpus = toy_corpus();
        let model = toy_model(&corpus);
        let pool = PreparedPool::prepare(&model, corpus.examples()).unwrap();
        let weights = SimilarityWeights::default();
        let target = &corpus.examples()[2];
        let ranked = rank_candidates(&model, &target.code, &pool, &weights);
        assert_eq!(ranked.len(), pool.len());
        assert_eq!(ranked[0].example().id, target.id);
        assert!(ranked[0].breakdown().combined > 0.999);
        for pair in ranked.windows(2) {
            assert!(pair[0].breakdown().combined >= pair[1].breakdown().combined);
        }
    }

    #[test]
    fn exact_ties_break_toward_the_smaller_id() {
        let code = "class Twin { void same() { call(); } }";
        let examples = vec![
            LabeledExample {
                id: "b-copy".to_owned(),
                code: code.to_owned(),
                label: TacticLabel::Audit,
                split: None,
            },
            LabeledExample {
                id: "a-copy".to_owned(),
                code: code.to_owned(),
                label: TacticLabel::Audit,
                split: None,
            },
        ];
        let corpus = toy_corpus();
        let model = toy_model(&corpus);
        let pool = PreparedPool::prepare(&model, &examples).unwrap();
        let ranked = rank_candidates(&model, code, &pool, &SimilarityWeights::default());
        assert_eq!(ranked[0].example().id, "a-copy");
        assert_eq!(ranked[1].example().id, "b-copy");
        assert_eq!(
            ranked[0].breakdown().combined,
            ranked[1].breakdown().combined
        );
    }

    #[test]
    fn empty_pool_is_an_error() {
        let corpus = toy_corpus();
        let model = toy_model(&corpus);
        assert!(matches!(
            PreparedPool::prepare(&model, &[]),
            Err(SimilarityError::EmptyPool)
        ));
        assert!(matches!(
            PreparedPool::prepare_sequential(&model, &[]),
            Err(SimilarityError::EmptyPool)
        ));
    }

    #[test]
    fn label_restricted_ranking_only_returns_that_label() {
        let corpus = toy_corpus();
        let model = toy_model(&corpus);
        let pool = PreparedPool::prepare(&model, corpus.examples()).unwrap();
        let query = PreparedQuery::prepare(&model, "q", "class Probe { void beat() {} }");
        let ranked = pool.rank_label(&query, &SimilarityWeights::default(), TacticLabel::Pooling);
        assert_eq!(ranked.len(), 2);
        for r in &ranked {
            assert_eq!(r.example().label, TacticLabel::Pooling);
        }
    }

    #[test]
    fn parallel_and_sequential_paths_agree_exactly() {
        let corpus = toy_corpus();
        let model = toy_model(&corpus);
        let par_pool = PreparedPool::prepare(&model, corpus.examples()).unwrap();
        let seq_pool = PreparedPool::prepare_sequential(&model, corpus.examples()).unwrap();
        let query = PreparedQuery::prepare(&model, "q", "class Probe { void audit() {} }");
        let weights = SimilarityWeights::default();
        let par = par_pool.rank(&query, &weights);
        let seq = seq_pool.rank_sequential(&query, &weights);
        assert_eq!(par.len(), seq.len());
        for (p, s) in par.iter().zip(&seq) {
            assert_eq!(p.example().id, s.example().id);
            assert_eq!(p.breakdown().semantic, s.breakdown().semantic);
            assert_eq!(p.breakdown().lexical, s.breakdown().lexical);
            assert_eq!(p.breakdown().syntactic, s.breakdown().syntactic);
            assert_eq!(p.breakdown().combined, s.breakdown().combined);
        }
    }

    #[test]
    fn ranking_agrees_with_a_direct_rescoring() {
        let corpus = toy_corpus();
        let model = toy_model(&corpus);
        let pool = PreparedPool::prepare(&model, corpus.examples()).unwrap();
        let weights = SimilarityWeights::new(0.5, 0.25, 0.25).unwrap();
        let query_code = "class Ledger { void record(String event) { trail.append(event); } }";
        let ranked = rank_candidates(&model, query_code, &pool, &weights);

        // Recompute every score from the public kernels and sort the same
        // way; the ranked order must match.
        let query_vec = model.featurize(query_code);
        let query_tokens: BTreeSet<String> =
            tokenize(query_code).tokens().iter().cloned().collect();
        let query_ast = parse_ast_sequence("query", query_code);
        let mut expected: Vec<(String, f64)> = corpus
            .examples()
            .iter()
            .map(|ex| {
                let sem = semantic_similarity(&query_vec, &model.featurize(&ex.code));
                let lex = lexical_similarity(
                    &query_tokens,
                    &tokenize(&ex.code).tokens().iter().cloned().collect(),
                );
                let syn =
                    syntactic_similarity(&query_ast, &parse_ast_sequence(&ex.id, &ex.code));
                (ex.id.clone(), combined_score(&weights, sem, lex, syn))
            })
            .collect();
        expected.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(&y.0)));

        for (got, want) in ranked.iter().zip(&expected) {
            assert_eq!(got.example().id, want.0);
            assert!((got.breakdown().combined - want.1).abs() <= TIGHT);
        }
    }

    #[test]
    fn explain_returns_the_kernel_breakdown() {
        let corpus = toy_corpus();
        let model = toy_model(&corpus);
        let code = "class AuditLog { void record(String event) { trail.append(event); } }";
        let breakdown = explain(&model, &SimilarityWeights::default(), code, code);
        assert!(breakdown.semantic > 0.999);
        assert_eq!(breakdown.lexical, 1.0);
        assert_eq!(breakdown.syntactic, 1.0);
        assert!(breakdown.combined > 0.999);
    }

    /// Full-matrix Wagner–Fischer, kept independent of the two-row
    /// implementation under test.
    fn full_matrix_distance(a: &[String], b: &[String]) -> usize {
        let mut grid = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in grid.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            grid[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let substitution = usize::from(a[i - 1] != b[j - 1]);
                grid[i][j] = (grid[i - 1][j] + 1)
                    .min(grid[i][j - 1] + 1)
                    .min(grid[i - 1][j - 1] + substitution);
            }
        }
        grid[a.len()][b.len()]
    }

    proptest! {
        #[test]
        fn jaccard_is_symmetric_and_bounded(
            a in proptest::collection::btree_set("[a-d]{1,2}", 0..8),
            b in proptest::collection::btree_set("[a-d]{1,2}", 0..8),
        ) {
            let ab = lexical_similarity(&a, &b);
            let ba = lexical_similarity(&b, &a);
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn edit_similarity_matches_full_matrix_distance(
            a in proptest::collection::vec("[a-d]", 0..40),
            b in proptest::collection::vec("[a-d]", 0..40),
        ) {
            let kinds_a: Vec<&str> = a.iter().map(String::as_str).collect();
            let kinds_b: Vec<&str> = b.iter().map(String::as_str).collect();
            let sa = AstSequence::from_kinds("a", &kinds_a);
            let sb = AstSequence::from_kinds("b", &kinds_b);
            let got = syntactic_similarity(&sa, &sb);
            let expected = if a.is_empty() && b.is_empty() {
                1.0
            } else {
                1.0 - full_matrix_distance(&a, &b) as f64 / a.len().max(b.len()) as f64
            };
            prop_assert_eq!(got, expected);
            let reversed = syntactic_similarity(&sb, &sa);
            prop_assert_eq!(got, reversed);
        }

        #[test]
        fn combined_stays_in_unit_interval(
            s in 0.0f64..=1.0,
            l in 0.0f64..=1.0,
            y in 0.0f64..=1.0,
            wa in 0.0f64..=1.0,
            wb in 0.0f64..=1.0,
        ) {
            // Normalize two free parameters into a valid weight triple.
            let total = wa + wb + 1.0;
            let weights = SimilarityWeights::new(wa / total, wb / total, 1.0 / total);
            prop_assume!(weights.is_ok());
            let got = combined_score(&weights.unwrap(), s, l, y);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&got));
        }
    }
}
