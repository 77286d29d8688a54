//! End-to-end detection runs: the persisted model container and the staged
//! orchestration (predict → predict_set → build_cot → select_demonstrations
//! → assemble_prompt → complete) shared by the CLI and the ablation harness.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{Prediction, SmallModel};
use crate::conformal::{calibrate_from_scores, predict_set, Calibrator};
use crate::corpus::{LabeledExample, TacticLabel};
use crate::llm::{run_batch, Backend, CompletionJob, CompletionRequest, DetectionResult};
use crate::promptkit::{
    assemble_prompt, build_cot, select_demonstrations_prepared, select_random_demonstrations,
    PromptBundle, PromptVariant, TASK_DESCRIPTION,
};
use crate::similarity::{PreparedPool, PreparedQuery, SimilarityWeights};

/// On-disk container layout version; bumped on any incompatible change.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Version of the tokenizer whose vocabulary the model was built with. A
/// loaded container must match, or features silently shift.
pub const TOKENIZER_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("stage {stage} failed on example {input_id}: {message}")]
    Stage {
        stage: &'static str,
        input_id: String,
        message: String,
    },
    #[error("model container {path}: {message}")]
    Container { path: PathBuf, message: String },
    #[error(
        "model container {path} has format version {found}; this build reads version {supported}"
    )]
    ContainerVersion {
        path: PathBuf,
        found: u32,
        supported: u32,
    },
    #[error(
        "model container {path} was built with tokenizer version {found}; this build uses {supported}"
    )]
    TokenizerVersion {
        path: PathBuf,
        found: u32,
        supported: u32,
    },
    #[error("the model container holds no calibrator; run calibration first")]
    MissingCalibrator,
}

fn stage_error(
    stage: &'static str,
    input_id: &str,
    source: impl std::fmt::Display,
) -> PipelineError {
    PipelineError::Stage {
        stage,
        input_id: input_id.to_owned(),
        message: source.to_string(),
    }
}

/// The persisted bundle of trained model plus (optionally) its calibrator,
/// tagged with format and tokenizer versions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelContainer {
    pub format_version: u32,
    pub tokenizer_version: u32,
    pub model: SmallModel,
    pub calibrator: Option<Calibrator>,
}

/// Just enough of the container to check versions before committing to the
/// full parse, so a future format yields a version error, not a field error.
#[derive(Debug, Deserialize)]
struct ContainerProbe {
    format_version: u32,
    tokenizer_version: u32,
}

impl ModelContainer {
    pub fn new(model: SmallModel) -> ModelContainer {
        ModelContainer {
            format_version: MODEL_FORMAT_VERSION,
            tokenizer_version: TOKENIZER_VERSION,
            model,
            calibrator: None,
        }
    }

    pub fn with_calibrator(mut self, calibrator: Calibrator) -> ModelContainer {
        self.calibrator = Some(calibrator);
        self
    }

    /// The calibrator, or the error every calibrator-dependent stage shares.
    pub fn require_calibrator(&self) -> Result<&Calibrator, PipelineError> {
        self.calibrator
            .as_ref()
            .ok_or(PipelineError::MissingCalibrator)
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let json =
            serde_json::to_string_pretty(self).expect("container serialization cannot fail");
        std::fs::write(path, json + "\n").map_err(|e| PipelineError::Container {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<ModelContainer, PipelineError> {
        let container_error = |message: String| PipelineError::Container {
            path: path.to_owned(),
            message,
        };
        let data = std::fs::read_to_string(path).map_err(|e| container_error(e.to_string()))?;
        let probe: ContainerProbe =
            serde_json::from_str(&data).map_err(|e| container_error(e.to_string()))?;
        if probe.format_version != MODEL_FORMAT_VERSION {
            return Err(PipelineError::ContainerVersion {
                path: path.to_owned(),
                found: probe.format_version,
                supported: MODEL_FORMAT_VERSION,
            });
        }
        if probe.tokenizer_version != TOKENIZER_VERSION {
            return Err(PipelineError::TokenizerVersion {
                path: path.to_owned(),
                found: probe.tokenizer_version,
                supported: TOKENIZER_VERSION,
            });
        }
        serde_json::from_str(&data).map_err(|e| container_error(e.to_string()))
    }
}

/// Derive a stage- or example-local seed from the run seed and a context
/// string. Stable across platforms, insensitive to evaluation order.
pub fn derive_seed(base: u64, context: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update(context.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Settings for one detection run.
#[derive(Debug, Clone)]
pub struct DetectOptions {
    pub variant: PromptVariant,
    pub weights: SimilarityWeights,
    /// Model name stamped into completion requests.
    pub llm_model_name: String,
    /// Worker-pool bound for the completion stage.
    pub concurrency: usize,
    /// Run seed; per-example seeds are derived from it.
    pub seed: u64,
}

impl Default for DetectOptions {
    fn default() -> DetectOptions {
        DetectOptions {
            variant: PromptVariant::Full,
            weights: SimilarityWeights::default(),
            llm_model_name: "deepseek-chat".to_owned(),
            concurrency: crate::llm::DEFAULT_CONCURRENCY,
            seed: 17,
        }
    }
}

/// A prompt ready to send, with the bookkeeping the result will carry.
#[derive(Debug, Clone)]
pub struct PromptPlan {
    pub bundle: PromptBundle,
    /// True when the conformal set was empty and the argmax singleton was
    /// substituted.
    pub fallback_used: bool,
    pub warnings: Vec<String>,
}

/// An uninformative prediction (uniform scores) paired with a calibrator
/// that admits everything: running the conformal step on these yields the
/// whole label universe in canonical order, which is what the small-model
/// ablation prompts against.
fn universe_prediction_set(alpha: f64) -> crate::conformal::PredictionSet {
    let uniform = Prediction {
        scores: vec![1.0 / TacticLabel::COUNT as f64; TacticLabel::COUNT],
        label: TacticLabel::ALL[0],
        confidence: 1.0 / TacticLabel::COUNT as f64,
    };
    // One calibration score with k = ⌈2(1−α)⌉ = 2 > m forces threshold 1.0.
    let admit_all =
        calibrate_from_scores(&[0.0], alpha).expect("static calibration input is valid");
    predict_set(&admit_all, &uniform)
}

/// Build the prompt for one example under `variant`, naming the failing
/// stage on error. `pool` and the model/calibrator may go unused by some
/// variants but are required so call sites stay uniform.
#[allow(clippy::too_many_arguments)]
pub fn plan_prompt(
    model: &SmallModel,
    calibrator: &Calibrator,
    pool: &PreparedPool,
    options: &DetectOptions,
    input_id: &str,
    code: &str,
) -> Result<PromptPlan, PipelineError> {
    let variant = options.variant;
    if matches!(variant, PromptVariant::PBas | PromptVariant::PAbas) {
        let bundle = assemble_prompt(TASK_DESCRIPTION, Vec::new(), None, code, None, variant)
            .map_err(|e| stage_error("assemble_prompt", input_id, e))?;
        return Ok(PromptPlan {
            bundle,
            fallback_used: false,
            warnings: Vec::new(),
        });
    }

    let (prediction, pset) = if variant == PromptVariant::NoSmallModel {
        (None, universe_prediction_set(calibrator.alpha()))
    } else {
        let prediction = model.predict(code);
        let pset = predict_set(calibrator, &prediction);
        (Some(prediction), pset)
    };
    let fallback_used = pset.fallback_used();

    let cot = if variant == PromptVariant::NoCot {
        None
    } else {
        Some(build_cot(&pset).map_err(|e| stage_error("build_cot", input_id, e))?)
    };

    let (demonstrations, warnings) = if variant == PromptVariant::NoDemos {
        (Vec::new(), Vec::new())
    } else {
        let query = PreparedQuery::prepare(model, input_id, code);
        let selected = if variant == PromptVariant::RandomDemos {
            let seed = derive_seed(options.seed, &format!("random_demos/{input_id}"));
            select_random_demonstrations(&query, pool, &pset, model, &options.weights, seed)
        } else {
            select_demonstrations_prepared(&query, pool, &pset, model, &options.weights)
        }
        .map_err(|e| stage_error("select_demonstrations", input_id, e))?;
        let warnings = selected
            .warnings
            .into_iter()
            .map(|w| format!("{input_id}: {w}"))
            .collect();
        (selected.demonstrations, warnings)
    };

    let bundle = assemble_prompt(
        TASK_DESCRIPTION,
        demonstrations,
        cot,
        code,
        prediction,
        variant,
    )
    .map_err(|e| stage_error("assemble_prompt", input_id, e))?;
    Ok(PromptPlan {
        bundle,
        fallback_used,
        warnings,
    })
}

/// Everything a detection run produces, prompts included (reports keep the
/// results; previews and goldens want the bundles).
#[derive(Debug)]
pub struct DetectionOutput {
    pub results: Vec<DetectionResult>,
    pub bundles: Vec<PromptBundle>,
    pub warnings: Vec<String>,
}

/// Run the full chain over `test`, demonstrating from `pool` (normally the
/// train split), and collect results in test order.
pub fn run_detection(
    container: &ModelContainer,
    pool: &[LabeledExample],
    test: &[LabeledExample],
    backend: &dyn Backend,
    options: &DetectOptions,
) -> Result<DetectionOutput, PipelineError> {
    let model = &container.model;
    let needs_pool = !matches!(
        options.variant,
        PromptVariant::NoDemos | PromptVariant::PBas | PromptVariant::PAbas
    );
    // Variants that never consult the pool get a one-example stand-in so an
    // empty pool only fails runs that would actually draw from it.
    let standin = [LabeledExample {
        id: "(unused)".to_owned(),
        code: "class Placeholder {}".to_owned(),
        label: TacticLabel::ALL[0],
        split: None,
    }];
    let pool_source: &[LabeledExample] = if needs_pool { pool } else { &standin };
    let prepared_pool = PreparedPool::prepare(model, pool_source)
        .map_err(|e| stage_error("select_demonstrations", "(demonstration pool)", e))?;
    let calibrator = if options.variant.is_baseline() {
        // Baselines run the LLM alone; a missing calibrator must not stop them.
        container.calibrator.as_ref()
    } else {
        Some(container.require_calibrator()?)
    };
    let placeholder = calibrate_from_scores(&[0.0], 0.5).expect("static input");
    let calibrator = calibrator.unwrap_or(&placeholder);

    let mut jobs = Vec::with_capacity(test.len());
    let mut bundles = Vec::with_capacity(test.len());
    let mut warnings = Vec::new();
    for example in test {
        let plan = plan_prompt(
            model,
            calibrator,
            &prepared_pool,
            options,
            &example.id,
            &example.code,
        )?;
        warnings.extend(plan.warnings);
        jobs.push(CompletionJob {
            input_id: example.id.clone(),
            request: CompletionRequest::new(&options.llm_model_name, &plan.bundle.rendered),
            prompt_variant: options.variant,
            fallback_used: plan.fallback_used,
        });
        bundles.push(plan.bundle);
    }

    let results = run_batch(backend, &jobs, options.concurrency).map_err(|e| {
        let input_id = e.input_id.clone();
        stage_error("complete", &input_id, e)
    })?;
    Ok(DetectionOutput {
        results,
        bundles,
        warnings,
    })
}
