//! Prompt assembly: chain-of-thought steps, demonstration selection and
//! formatting, and the final augmented prompt, plus two fixed baselines.
//!
//! A prompt for one input snippet is built from up to four sections, in
//! order: a task description, formatted demonstrations (one per label in the
//! conformal prediction set, chosen by hybrid similarity), a five-step
//! reasoning template instantiated with the prediction set, and the input
//! snippet with the classifier's own prediction attached. Ablation variants
//! drop or replace individual sections; two baseline variants bypass the
//! machinery entirely and render fixed single-shot prompts.
//!
//! Every render is a pure function of its inputs, so identical inputs give
//! byte-identical prompts — golden-file tests pin the exact texts.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{Prediction, SmallModel};
use crate::conformal::PredictionSet;
use crate::corpus::{LabeledExample, TacticLabel};
use crate::similarity::{
    PreparedPool, PreparedQuery, SimilarityBreakdown, SimilarityError, SimilarityWeights,
};

/// Task framing placed at the top of every non-baseline prompt.
pub const TASK_DESCRIPTION: &str = "You are an expert software architect reviewing Java code. \
Detect which architectural tactic the input code snippet implements. \
The candidate labels are {'audit', 'authenticate', 'heartbeat', 'pooling', 'scheduler', 'unrelated'}.";

/// Closing instruction that makes the answer machine-parseable.
const OUTPUT_FORMAT_INSTRUCTION: &str = "Provide a rationale paragraph explaining your \
reasoning, then end your response with a final line formatted exactly as:\nFinal label: <label>";

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("cannot build a reasoning prompt from an empty prediction set")]
    EmptyPredictionSet,
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error("prompt parts do not fit variant {variant}: {reason}")]
    VariantMismatch {
        variant: PromptVariant,
        reason: String,
    },
}

/// Which prompt shape to render: the full augmented prompt, one of its four
/// ablations, or one of the two fixed baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    Full,
    NoSmallModel,
    NoCot,
    NoDemos,
    RandomDemos,
    PBas,
    PAbas,
}

/// The five variants exercised by the ablation harness, in report order.
pub const ABLATION_VARIANTS: [PromptVariant; 5] = [
    PromptVariant::Full,
    PromptVariant::NoSmallModel,
    PromptVariant::NoCot,
    PromptVariant::NoDemos,
    PromptVariant::RandomDemos,
];

impl PromptVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            PromptVariant::Full => "full",
            PromptVariant::NoSmallModel => "no_small_model",
            PromptVariant::NoCot => "no_cot",
            PromptVariant::NoDemos => "no_demos",
            PromptVariant::RandomDemos => "random_demos",
            PromptVariant::PBas => "p_bas",
            PromptVariant::PAbas => "p_abas",
        }
    }

    /// Human-facing name used in ablation reports.
    pub fn report_name(&self) -> &'static str {
        match self {
            PromptVariant::Full => "Full",
            PromptVariant::NoSmallModel => "w/o Small Model",
            PromptVariant::NoCot => "w/o CoT",
            PromptVariant::NoDemos => "w/o Demonstration",
            PromptVariant::RandomDemos => "Random Demonstration",
            PromptVariant::PBas => "P_Bas",
            PromptVariant::PAbas => "P_ABas",
        }
    }

    /// True for the two fixed comparison prompts that bypass the
    /// small-model-augmented assembly entirely.
    pub fn is_baseline(&self) -> bool {
        matches!(self, PromptVariant::PBas | PromptVariant::PAbas)
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseVariantError(String);

impl fmt::Display for ParseVariantError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown prompt variant {:?}", self.0)
    }
}

impl std::error::Error for ParseVariantError {}

impl std::str::FromStr for PromptVariant {
    type Err = ParseVariantError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(PromptVariant::Full),
            "no_small_model" => Ok(PromptVariant::NoSmallModel),
            "no_cot" => Ok(PromptVariant::NoCot),
            "no_demos" => Ok(PromptVariant::NoDemos),
            "random_demos" => Ok(PromptVariant::RandomDemos),
            "p_bas" => Ok(PromptVariant::PBas),
            "p_abas" => Ok(PromptVariant::PAbas),
            other => Err(ParseVariantError(other.to_owned())),
        }
    }
}

/// The five-step reasoning template instantiated with one prediction set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CotPrompt {
    steps: Vec<String>,
    prediction_set_render: String,
}

impl CotPrompt {
    pub fn steps(&self) -> &[String] {
        &self.steps
    }

    pub fn prediction_set_render(&self) -> &str {
        &self.prediction_set_render
    }
}

/// `{'audit', 'pooling'}`-style rendering of a label list.
pub fn render_label_set(labels: &[TacticLabel]) -> String {
    let quoted: Vec<String> = labels.iter().map(|l| format!("'{l}'")).collect();
    format!("{{{}}}", quoted.join(", "))
}

/// Instantiate the five reasoning steps for a prediction set: semantic
/// understanding, structural analysis, classification judgment, label
/// identification, and synthesis.
pub fn build_cot(pset: &PredictionSet) -> Result<CotPrompt, PromptError> {
    if pset.is_empty() {
        return Err(PromptError::EmptyPredictionSet);
    }
    let set = render_label_set(pset.labels());
    let steps = vec![
        "Understand the core behavior and intent of the input code snippet.".to_owned(),
        "Analyze key terms and structures in the code to identify components that may \
         implement a specific architectural tactic."
            .to_owned(),
        format!(
            "Based on the previous analysis and context, assess whether the code snippet \
             is related to a tactic label in the prediction set {set}."
        ),
        format!(
            "If related, identify the label of the code snippet from the prediction set \
             {set}. If not related, check if the label belongs to a category outside of \
             the prediction set."
        ),
        "Integrate the reasoning steps and sequentially derive whether the code snippet \
         implements an architectural tactic and determine its corresponding label."
            .to_owned(),
    ];
    Ok(CotPrompt {
        steps,
        prediction_set_render: set,
    })
}

/// One formatted in-context example: the snippet, what the classifier said
/// about it, and its ground-truth label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub code: String,
    pub small_model_prediction: Prediction,
    pub true_label: TacticLabel,
    pub similarity: SimilarityBreakdown,
}

/// Selected demonstrations plus warnings for prediction-set labels that had
/// no pool examples to draw from.
#[derive(Debug, Clone)]
pub struct SelectedDemonstrations {
    pub demonstrations: Vec<Demonstration>,
    pub warnings: Vec<String>,
}

/// For each label in the prediction set (in set order), pick the single
/// most-similar pool example carrying that label. Labels whose pool
/// partition is empty are skipped with a warning.
pub fn select_demonstrations(
    query_code: &str,
    pool: &[LabeledExample],
    pset: &PredictionSet,
    model: &SmallModel,
    weights: &SimilarityWeights,
) -> Result<SelectedDemonstrations, PromptError> {
    let prepared = PreparedPool::prepare(model, pool)?;
    let query = PreparedQuery::prepare(model, "query", query_code);
    select_demonstrations_prepared(&query, &prepared, pset, model, weights)
}

/// [`select_demonstrations`] against a pool (and query) prepared once by the
/// caller — the form used when many inputs share one pool.
pub fn select_demonstrations_prepared(
    query: &PreparedQuery,
    pool: &PreparedPool,
    pset: &PredictionSet,
    model: &SmallModel,
    weights: &SimilarityWeights,
) -> Result<SelectedDemonstrations, PromptError> {
    if pool.is_empty() {
        return Err(PromptError::Similarity(SimilarityError::EmptyPool));
    }
    let mut demonstrations = Vec::new();
    let mut warnings = Vec::new();
    for &label in pset.labels() {
        let ranked = pool.rank_label(query, weights, label);
        match ranked.first() {
            Some(best) => demonstrations.push(Demonstration {
                code: best.example().code.clone(),
                small_model_prediction: model.predict(&best.example().code),
                true_label: best.example().label,
                similarity: *best.breakdown(),
            }),
            None => warnings.push(format!(
                "no pool examples labeled '{label}'; demonstration skipped"
            )),
        }
    }
    Ok(SelectedDemonstrations {
        demonstrations,
        warnings,
    })
}

/// Ablation twin of [`select_demonstrations_prepared`]: one uniform draw per
/// in-set label partition instead of the similarity ranking. Deterministic
/// for a given seed.
pub fn select_random_demonstrations(
    query: &PreparedQuery,
    pool: &PreparedPool,
    pset: &PredictionSet,
    model: &SmallModel,
    weights: &SimilarityWeights,
    seed: u64,
) -> Result<SelectedDemonstrations, PromptError> {
    if pool.is_empty() {
        return Err(PromptError::Similarity(SimilarityError::EmptyPool));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut demonstrations = Vec::new();
    let mut warnings = Vec::new();
    for &label in pset.labels() {
        let partition: Vec<_> = pool
            .entries()
            .iter()
            .filter(|entry| entry.example().label == label)
            .collect();
        if partition.is_empty() {
            warnings.push(format!(
                "no pool examples labeled '{label}'; demonstration skipped"
            ));
            continue;
        }
        let chosen = partition[rng.gen_range(0..partition.len())];
        // Ranking against only the chosen entry recovers its breakdown.
        let rematch = pool.rank_label(query, weights, label);
        let breakdown = rematch
            .iter()
            .find(|m| m.example().id == chosen.example().id)
            .map(|m| *m.breakdown())
            .expect("chosen entry is in its own label partition");
        demonstrations.push(Demonstration {
            code: chosen.example().code.clone(),
            small_model_prediction: model.predict(&chosen.example().code),
            true_label: chosen.example().label,
            similarity: breakdown,
        });
    }
    Ok(SelectedDemonstrations {
        demonstrations,
        warnings,
    })
}

/// A fully assembled prompt: the parts it was built from plus the final
/// rendered text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub task_description: String,
    pub demonstrations: Vec<Demonstration>,
    pub cot: Option<CotPrompt>,
    pub input_code: String,
    pub input_prediction: Option<Prediction>,
    pub variant: PromptVariant,
    pub rendered: String,
}

/// Assemble and render the prompt for one input. The parts must match the
/// variant: ablated sections must be absent, retained sections present.
pub fn assemble_prompt(
    task_description: &str,
    demonstrations: Vec<Demonstration>,
    cot: Option<CotPrompt>,
    input_code: &str,
    input_prediction: Option<Prediction>,
    variant: PromptVariant,
) -> Result<PromptBundle, PromptError> {
    let mismatch = |reason: &str| PromptError::VariantMismatch {
        variant,
        reason: reason.to_owned(),
    };
    match variant {
        PromptVariant::PBas | PromptVariant::PAbas => {
            if !demonstrations.is_empty() || cot.is_some() || input_prediction.is_some() {
                return Err(mismatch(
                    "baseline prompts take no demonstrations, reasoning steps, or prediction",
                ));
            }
        }
        PromptVariant::NoSmallModel => {
            if input_prediction.is_some() {
                return Err(mismatch("input prediction must be withheld"));
            }
            if cot.is_none() {
                return Err(mismatch("reasoning steps are required"));
            }
        }
        PromptVariant::NoCot => {
            if cot.is_some() {
                return Err(mismatch("reasoning steps must be withheld"));
            }
            if input_prediction.is_none() {
                return Err(mismatch("input prediction is required"));
            }
        }
        PromptVariant::NoDemos => {
            if !demonstrations.is_empty() {
                return Err(mismatch("demonstrations must be withheld"));
            }
            if cot.is_none() {
                return Err(mismatch("reasoning steps are required"));
            }
            if input_prediction.is_none() {
                return Err(mismatch("input prediction is required"));
            }
        }
        PromptVariant::Full | PromptVariant::RandomDemos => {
            if cot.is_none() {
                return Err(mismatch("reasoning steps are required"));
            }
            if input_prediction.is_none() {
                return Err(mismatch("input prediction is required"));
            }
        }
    }

    let rendered = match variant {
        PromptVariant::PBas => baseline_prompts(input_code).0,
        PromptVariant::PAbas => baseline_prompts(input_code).1,
        _ => render_augmented(
            task_description,
            &demonstrations,
            cot.as_ref(),
            input_code,
            input_prediction.as_ref(),
            variant,
        ),
    };
    Ok(PromptBundle {
        task_description: task_description.to_owned(),
        demonstrations,
        cot,
        input_code: input_code.to_owned(),
        input_prediction,
        variant,
        rendered,
    })
}

fn render_augmented(
    task_description: &str,
    demonstrations: &[Demonstration],
    cot: Option<&CotPrompt>,
    input_code: &str,
    input_prediction: Option<&Prediction>,
    variant: PromptVariant,
) -> String {
    // The small-model ablation keeps the demonstrations but strips every
    // prediction/confidence line from them and from the input section.
    let show_predictions = variant != PromptVariant::NoSmallModel;
    let mut out = String::new();
    out.push_str(task_description);
    out.push('\n');
    for (i, demo) in demonstrations.iter().enumerate() {
        out.push_str(&format!("\nDemonstration {}:\nCode snippet:\n", i + 1));
        out.push_str(&demo.code);
        out.push('\n');
        if show_predictions {
            out.push_str(&format!(
                "Small model prediction: {} (confidence {:.2})\n",
                demo.small_model_prediction.label, demo.small_model_prediction.confidence
            ));
        }
        out.push_str(&format!("True label: {}\n", demo.true_label));
    }
    if let Some(cot) = cot {
        out.push_str("\nReasoning steps:\n");
        for (i, step) in cot.steps.iter().enumerate() {
            out.push_str(&format!("Step {}: {step}\n", i + 1));
        }
    }
    out.push_str("\nInput code snippet:\n");
    out.push_str(input_code);
    out.push('\n');
    if show_predictions {
        if let Some(prediction) = input_prediction {
            out.push_str(&format!(
                "Small model prediction: {} (confidence {:.2})\n",
                prediction.label, prediction.confidence
            ));
        }
    }
    out.push('\n');
    out.push_str(OUTPUT_FORMAT_INSTRUCTION);
    out.push('\n');
    out
}

/// The two fixed baseline prompts with the code snippet substituted in.
pub fn baseline_prompts(code: &str) -> (String, String) {
    let p_bas = format!(
        "Please analyze the input code snippet, and determine the most appropriate \
         architectural tactic label from {{'audit', 'authenticate', 'heartbeat', 'pooling', \
         'scheduler', 'unrelated'}}, providing your reasons.\n{code}\n"
    );
    let p_abas = format!(
        "Step1: Please understand the behavior and purpose of the input code snippet.\n\
         Step2: Determine the unique true label of this code from {{'audit', 'authenticate', \
         'heartbeat', 'pooling', 'scheduler', 'unrelated'}}.\n\
         Step3: Please give your reasoning.\n{code}\n"
    );
    (p_bas, p_abas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::TrainConfig;
    use crate::conformal::{calibrate_from_scores, predict_set, predict_set_raw};
    use crate::corpus::Corpus;

    fn pset_of(labels: &[TacticLabel]) -> PredictionSet {
        // A calibrator with threshold 0.9 admits every label scoring at
        // least 0.1; the wanted labels share probability 0.9 (each at least
        // 0.15) and the rest sit at 0 (nonconformity 1).
        let scores = vec![0.9; 100];
        let calibrator = calibrate_from_scores(&scores, 0.05).unwrap();
        let mut prediction = Prediction {
            scores: vec![0.0; TacticLabel::COUNT],
            label: labels[0],
            confidence: 0.9,
        };
        let weight = 0.9 / labels.len() as f64;
        for label in labels {
            prediction.scores[label.index()] = weight;
        }
        let set = predict_set(&calibrator, &prediction);
        assert_eq!(set.labels().len(), labels.len());
        set
    }

    #[test]
    fn cot_names_exactly_the_set_labels() {
        let pset = pset_of(&[TacticLabel::Audit, TacticLabel::Pooling]);
        let cot = build_cot(&pset).unwrap();
        assert_eq!(cot.prediction_set_render(), "{'audit', 'pooling'}");
        assert_eq!(cot.steps().len(), 5);
        assert!(cot.steps()[2].contains("{'audit', 'pooling'}"));
        assert!(cot.steps()[3].contains("{'audit', 'pooling'}"));
        for absent in ["authenticate", "heartbeat", "scheduler", "unrelated"] {
            assert!(!cot.steps()[3].contains(absent), "unexpected {absent}");
        }
    }

    #[test]
    fn cot_step_four_includes_the_out_of_set_check() {
        let pset = pset_of(&[TacticLabel::Heartbeat]);
        let cot = build_cot(&pset).unwrap();
        assert!(cot.steps()[3]
            .contains("check if the label belongs to a category outside of the prediction set"));
    }

    #[test]
    fn cot_over_the_full_universe_names_all_six() {
        let pset = pset_of(&TacticLabel::ALL);
        let cot = build_cot(&pset).unwrap();
        assert_eq!(
            cot.prediction_set_render(),
            "{'audit', 'authenticate', 'heartbeat', 'pooling', 'scheduler', 'unrelated'}"
        );
    }

    #[test]
    fn cot_render_is_deterministic() {
        let pset = pset_of(&[TacticLabel::Audit, TacticLabel::Scheduler]);
        assert_eq!(build_cot(&pset).unwrap(), build_cot(&pset).unwrap());
    }

    #[test]
    fn cot_rejects_an_empty_set() {
        // Bypass the fallback to obtain a genuinely empty raw set.
        let scores: Vec<f64> = vec![0.0; 20];
        let calibrator = calibrate_from_scores(&scores, 0.05).unwrap();
        let prediction = Prediction {
            scores: vec![0.5, 0.1, 0.1, 0.1, 0.1, 0.1],
            label: TacticLabel::Audit,
            confidence: 0.5,
        };
        let raw = predict_set_raw(&calibrator, &prediction);
        assert!(raw.is_empty());
        assert!(matches!(
            build_cot(&raw),
            Err(PromptError::EmptyPredictionSet)
        ));
    }

    fn toy_corpus() -> Corpus {
        let snippets: &[(&str, TacticLabel)] = &[
            (
                "class AuditTrail { void log(String event) { trail.append(event); } }",
                TacticLabel::Audit,
            ),
            (
                "class AuditWriter { void log(String entry) { trail.persist(entry); } }",
                TacticLabel::Audit,
            ),
            (
                "class Heartbeat { void pulse() { monitor.ping(); } }",
                TacticLabel::Heartbeat,
            ),
            (
                "class PulseCheck { void pulse() { monitor.beat(); } }",
                TacticLabel::Heartbeat,
            ),
            (
                "class PoolManager { Connection acquire() { return pool.take(); } }",
                TacticLabel::Pooling,
            ),
            (
                "class LeaseBroker { Connection acquire() { return pool.lease(); } }",
                TacticLabel::Pooling,
            ),
        ];
        let examples = snippets
            .iter()
            .enumerate()
            .map(|(i, (code, label))| LabeledExample {
                id: format!("pool-{i:02}"),
                code: (*code).to_owned(),
                label: *label,
                split: None,
            })
            .collect();
        Corpus::from_examples(examples).unwrap()
    }

    fn toy_model(corpus: &Corpus) -> SmallModel {
        SmallModel::train(corpus.examples(), &TrainConfig::default()).unwrap()
    }

    #[test]
    fn demonstrations_follow_set_order_one_per_label() {
        let corpus = toy_corpus();
        let model = toy_model(&corpus);
        let pset = pset_of(&[TacticLabel::Audit, TacticLabel::Pooling]);
        let selected = select_demonstrations(
            "class TrailKeeper { void log(String e) { trail.append(e); } }",
            corpus.examples(),
            &pset,
            &model,
            &SimilarityWeights::default(),
        )
        .unwrap();
        assert_eq!(selected.demonstrations.len(), 2);
        assert!(selected.warnings.is_empty());
        assert_eq!(selected.demonstrations[0].true_label, TacticLabel::Audit);
        assert_eq!(selected.demonstrations[1].true_label, TacticLabel::Pooling);
        for demo in &selected.demonstrations {
            assert!(pset.contains(demo.true_label));
        }
    }

    #[test]
    fn empty_label_partition_is_skipped_with_a_warning() {
        let corpus = toy_corpus();
        let model = toy_model(&corpus);
        let pset = pset_of(&[TacticLabel::Scheduler]);
        let selected = select_demonstrations(
            "class Anything {}",
            corpus.examples(),
            &pset,
            &model,
            &SimilarityWeights::default(),
        )
        .unwrap();
        assert!(selected.demonstrations.is_empty());
        assert_eq!(selected.warnings.len(), 1);
        assert!(selected.warnings[0].contains("scheduler"));
    }

    #[test]
    fn a_query_identical_to_a_pool_example_selects_it() {
        let corpus = toy_corpus();
        let model = toy_model(&corpus);
        let pset = pset_of(&[TacticLabel::Heartbeat]);
        let target = &corpus.examples()[2];
        let selected = select_demonstrations(
            &target.code,
            corpus.examples(),
            &pset,
            &model,
            &SimilarityWeights::default(),
        )
        .unwrap();
        assert_eq!(selected.demonstrations.len(), 1);
        assert_eq!(selected.demonstrations[0].code, target.code);
        assert!(selected.demonstrations[0].similarity.combined > 0.999);
    }

    #[test]
    fn an_entirely_empty_pool_is_an_error() {
        let corpus = toy_corpus();
        let model = toy_model(&corpus);
        let pset = pset_of(&[TacticLabel::Audit]);
        let result = select_demonstrations(
            "class X {}",
            &[],
            &pset,
            &model,
            &SimilarityWeights::default(),
        );
        assert!(matches!(
            result,
            Err(PromptError::Similarity(SimilarityError::EmptyPool))
        ));
    }

    #[test]
    fn random_selection_is_seed_deterministic_and_label_correct() {
        let corpus = toy_corpus();
        let model = toy_model(&corpus);
        let pool = PreparedPool::prepare(&model, corpus.examples()).unwrap();
        let query = PreparedQuery::prepare(&model, "q", "class Probe { void pulse() {} }");
        let pset = pset_of(&[TacticLabel::Audit, TacticLabel::Heartbeat]);
        let weights = SimilarityWeights::default();
        let first =
            select_random_demonstrations(&query, &pool, &pset, &model, &weights, 7).unwrap();
        let second =
            select_random_demonstrations(&query, &pool, &pset, &model, &weights, 7).unwrap();
        assert_eq!(first.demonstrations.len(), 2);
        assert_eq!(first.demonstrations[0].true_label, TacticLabel::Audit);
        assert_eq!(first.demonstrations[1].true_label, TacticLabel::Heartbeat);
        for (a, b) in first.demonstrations.iter().zip(&second.demonstrations) {
            assert_eq!(a.code, b.code);
        }
    }

    fn sample_parts(
        corpus: &Corpus,
        model: &SmallModel,
    ) -> (Vec<Demonstration>, CotPrompt, String, Prediction) {
        let pset = pset_of(&[TacticLabel::Audit, TacticLabel::Pooling]);
        let input_code = "class LedgerSink { void log(String e) { trail.append(e); } }";
        let selected = select_demonstrations(
            input_code,
            corpus.examples(),
            &pset,
            model,
            &SimilarityWeights::default(),
        )
        .unwrap();
        let cot = build_cot(&pset).unwrap();
        let prediction = model.predict(input_code);
        (
            selected.demonstrations,
            cot,
            input_code.to_owned(),
            prediction,
        )
    }

    #[test]
    fn full_render_orders_all_sections() {
        let corpus = toy_corpus();
        let model = toy_model(&corpus);
        let (demos, cot, input_code, prediction) = sample_parts(&corpus, &model);
        let bundle = assemble_prompt(
            TASK_DESCRIPTION,
            demos,
            Some(cot),
            &input_code,
            Some(prediction),
            PromptVariant::Full,
        )
        .unwrap();
        let text = &bundle.rendered;
        let task = text.find("expert software architect").unwrap();
        let demo1 = text.find("Demonstration 1:").unwrap();
        let demo2 = text.find("Demonstration 2:").unwrap();
        let steps = text.find("Step 1:").unwrap();
        let input = text.find("Input code snippet:").unwrap();
        let instruction = text.find("Final label: <label>").unwrap();
        assert!(task < demo1 && demo1 < demo2 && demo2 < steps);
        assert!(steps < input && input < instruction);
        assert!(text.contains("True label: audit"));
        assert!(text.contains("confidence"));
    }

    #[test]
    fn confidence_renders_with_two_decimals() {
        let demo = Demonstration {
            code: "class A {}".to_owned(),
            small_model_prediction: Prediction {
                scores: vec![0.5, 0.1, 0.1, 0.1, 0.1, 0.1],
                label: TacticLabel::Audit,
                confidence: 0.5,
            },
            true_label: TacticLabel::Audit,
            similarity: SimilarityBreakdown {
                semantic: 1.0,
                lexical: 1.0,
                syntactic: 1.0,
                combined: 1.0,
            },
        };
        let text = render_augmented(
            TASK_DESCRIPTION,
            &[demo],
            None,
            "class B {}",
            None,
            PromptVariant::NoCot,
        );
        assert!(text.contains("(confidence 0.50)"));
    }

    #[test]
    fn no_small_model_render_has_no_prediction_lines() {
        let corpus = toy_corpus();
        let model = toy_model(&corpus);
        let (demos, cot, input_code, _) = sample_parts(&corpus, &model);
        let bundle = assemble_prompt(
            TASK_DESCRIPTION,
            demos,
            Some(cot),
            &input_code,
            None,
            PromptVariant::NoSmallModel,
        )
        .unwrap();
        assert!(!bundle.rendered.contains("Small model prediction"));
        assert!(!bundle.rendered.contains("confidence"));
        assert!(bundle.rendered.contains("Demonstration 1:"));
        assert!(bundle.rendered.contains("True label:"));
    }

    #[test]
    fn no_cot_render_has_no_reasoning_steps() {
        let corpus = toy_corpus();
        let model = toy_model(&corpus);
        let (demos, _, input_code, prediction) = sample_parts(&corpus, &model);
        let bundle = assemble_prompt(
            TASK_DESCRIPTION,
            demos,
            None,
            &input_code,
            Some(prediction),
            PromptVariant::NoCot,
        )
        .unwrap();
        assert!(!bundle.rendered.contains("Reasoning steps"));
        assert!(!bundle.rendered.contains("Step 1:"));
        assert!(bundle.rendered.contains("Demonstration 1:"));
    }

    #[test]
    fn no_demos_render_has_no_demonstration_sections() {
        let corpus = toy_corpus();
        let model = toy_model(&corpus);
        let (_, cot, input_code, prediction) = sample_parts(&corpus, &model);
        let bundle = assemble_prompt(
            TASK_DESCRIPTION,
            Vec::new(),
            Some(cot),
            &input_code,
            Some(prediction),
            PromptVariant::NoDemos,
        )
        .unwrap();
        assert!(!bundle.rendered.contains("Demonstration"));
        assert!(bundle.rendered.contains("Step 1:"));
        assert!(bundle.rendered.contains("Small model prediction"));
    }

    #[test]
    fn variant_part_mismatches_are_rejected() {
        let corpus = toy_corpus();
        let model = toy_model(&corpus);
        let (demos, cot, input_code, prediction) = sample_parts(&corpus, &model);
        // Demonstrations under no_demos.
        assert!(matches!(
            assemble_prompt(
                TASK_DESCRIPTION,
                demos.clone(),
                Some(cot.clone()),
                &input_code,
                Some(prediction.clone()),
                PromptVariant::NoDemos,
            ),
            Err(PromptError::VariantMismatch { .. })
        ));
        // Prediction present under no_small_model.
        assert!(matches!(
            assemble_prompt(
                TASK_DESCRIPTION,
                demos.clone(),
                Some(cot.clone()),
                &input_code,
                Some(prediction.clone()),
                PromptVariant::NoSmallModel,
            ),
            Err(PromptError::VariantMismatch { .. })
        ));
        // Reasoning steps present under no_cot.
        assert!(matches!(
            assemble_prompt(
                TASK_DESCRIPTION,
                demos.clone(),
                Some(cot.clone()),
                &input_code,
                Some(prediction.clone()),
                PromptVariant::NoCot,
            ),
            Err(PromptError::VariantMismatch { .. })
        ));
        // Missing prediction under full.
        assert!(matches!(
            assemble_prompt(
                TASK_DESCRIPTION,
                demos,
                Some(cot.clone()),
                &input_code,
                None,
                PromptVariant::Full,
            ),
            Err(PromptError::VariantMismatch { .. })
        ));
        // Extra parts under a baseline.
        assert!(matches!(
            assemble_prompt(
                TASK_DESCRIPTION,
                Vec::new(),
                Some(cot),
                &input_code,
                None,
                PromptVariant::PBas,
            ),
            Err(PromptError::VariantMismatch { .. })
        ));
    }

    #[test]
    fn p_bas_renders_the_fixed_text_with_the_code() {
        let code = "class Login { boolean check(String u, String p) { return true; } }";
        let bundle = assemble_prompt(
            TASK_DESCRIPTION,
            Vec::new(),
            None,
            code,
            None,
            PromptVariant::PBas,
        )
        .unwrap();
        assert!(bundle
            .rendered
            .starts_with("Please analyze the input code snippet"));
        assert!(bundle.rendered.contains(
            "{'audit', 'authenticate', 'heartbeat', 'pooling', 'scheduler', 'unrelated'}"
        ));
        assert!(bundle.rendered.contains(code));
        assert!(!bundle.rendered.contains("Final label"));
    }

    #[test]
    fn p_abas_renders_the_three_steps() {
        let (_, p_abas) = baseline_prompts("class X {}");
        assert!(p_abas.contains("Step1:"));
        assert!(p_abas.contains("Step2:"));
        assert!(p_abas.contains("Step3:"));
        assert!(p_abas.contains("Determine the unique true label"));
        assert!(p_abas.contains("class X {}"));
    }

    #[test]
    fn empty_code_still_renders_baselines() {
        let (p_bas, p_abas) = baseline_prompts("");
        assert!(p_bas.starts_with("Please analyze the input code snippet"));
        assert!(p_abas.contains("Step3:"));
    }

    #[test]
    fn renders_are_deterministic() {
        let corpus = toy_corpus();
        let model = toy_model(&corpus);
        let (demos, cot, input_code, prediction) = sample_parts(&corpus, &model);
        let a = assemble_prompt(
            TASK_DESCRIPTION,
            demos.clone(),
            Some(cot.clone()),
            &input_code,
            Some(prediction.clone()),
            PromptVariant::Full,
        )
        .unwrap();
        let b = assemble_prompt(
            TASK_DESCRIPTION,
            demos,
            Some(cot),
            &input_code,
            Some(prediction),
            PromptVariant::Full,
        )
        .unwrap();
        assert_eq!(a.rendered, b.rendered);
    }

    #[test]
    fn variant_names_round_trip() {
        for variant in [
            PromptVariant::Full,
            PromptVariant::NoSmallModel,
            PromptVariant::NoCot,
            PromptVariant::NoDemos,
            PromptVariant::RandomDemos,
            PromptVariant::PBas,
            PromptVariant::PAbas,
        ] {
            let parsed: PromptVariant = variant.as_str().parse().unwrap();
            assert_eq!(parsed, variant);
        }
        assert!("nonsense".parse::<PromptVariant>().is_err());
        assert_eq!(ABLATION_VARIANTS.len(), 5);
    }
}
