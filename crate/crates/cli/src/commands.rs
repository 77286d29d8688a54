//! Command implementations. Every artifact-writing command drops a
//! `manifest-<command>.json` beside its outputs with the effective config,
//! its hash, the seeds used, and component versions — enough to re-run the
//! command identically. Nothing here writes a timestamp, so repeated runs
//! with identical inputs produce byte-identical artifacts.

use std::path::Path;

use serde::Serialize;

use tactician_core::classifier::{SmallModel, TrainConfig};
use tactician_core::conformal::calibrate;
use tactician_core::corpus::{Corpus, Split};
use tactician_core::eval::{
    chi_square, clarity_contingency, load_clarity_jsonl, metrics_with_options, score_with_policy,
    ChiSquareResult, EvalError, EvalReport, MetricsRow, RowLabel, UnparsedPolicy,
    render_metrics_table, run_ablation,
};
use tactician_core::llm::{
    Backend, DetectionResult, EchoBackend, HttpBackend, RecordingBackend, ReplayBackend,
};
use tactician_core::pipeline::{
    derive_seed, plan_prompt, run_detection, DetectOptions, ModelContainer, PipelineError,
    MODEL_FORMAT_VERSION, TOKENIZER_VERSION,
};
use tactician_core::similarity::{explain, PreparedPool};

use crate::config::{BackendConfig, RunConfig};
use crate::CliError;

// --- shared plumbing ---------------------------------------------------------

fn data_error(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{context}: {e}"))
}

fn classify_pipeline(e: PipelineError) -> CliError {
    match &e {
        // Only the completion stage talks to the outside world.
        PipelineError::Stage { stage, .. } if *stage == "complete" => {
            CliError::Backend(e.to_string())
        }
        _ => CliError::Data(e.to_string()),
    }
}

fn classify_eval(e: EvalError) -> CliError {
    match e {
        EvalError::Pipeline(inner) => classify_pipeline(inner),
        other => CliError::Data(other.to_string()),
    }
}

fn load_corpus(path: &Path) -> Result<Corpus, CliError> {
    Corpus::load_jsonl(path).map_err(|e| data_error(&format!("corpus {}", path.display()), e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| data_error(&parent.display().to_string(), e))?;
    }
    std::fs::write(path, contents).map_err(|e| data_error(&path.display().to_string(), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value).expect("artifact serialization cannot fail");
    write_file(path, &(json + "\n"))
}

#[derive(Debug, Serialize)]
struct Versions {
    cli: &'static str,
    core: &'static str,
    model_format: u32,
    tokenizer: u32,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_sha256: String,
    seed: u64,
    /// Seed actually fed to this command's randomized stage, when it has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    stage_seed: Option<u64>,
    versions: Versions,
    effective_config: &'a RunConfig,
}

fn write_manifest(
    out_dir: &Path,
    config: &RunConfig,
    command: &str,
    stage_seed: Option<u64>,
) -> Result<(), CliError> {
    let manifest = Manifest {
        command,
        config_sha256: config.sha256(),
        seed: config.seed,
        stage_seed,
        versions: Versions {
            cli: env!("CARGO_PKG_VERSION"),
            core: tactician_core::VERSION,
            model_format: MODEL_FORMAT_VERSION,
            tokenizer: TOKENIZER_VERSION,
        },
        effective_config: config,
    };
    write_json(&out_dir.join(format!("manifest-{command}.json")), &manifest)
}

pub fn build_backend(config: &BackendConfig) -> Result<Box<dyn Backend>, CliError> {
    match config {
        BackendConfig::Echo => Ok(Box::new(EchoBackend)),
        BackendConfig::Replay { dir } => Ok(Box::new(ReplayBackend::new(dir))),
        BackendConfig::EchoRecord { dir } => {
            std::fs::create_dir_all(dir).map_err(|e| data_error(&dir.display().to_string(), e))?;
            Ok(Box::new(RecordingBackend::new(EchoBackend, dir)))
        }
        BackendConfig::Http {
            endpoint,
            api_key_env,
        } => Ok(Box::new(HttpBackend::new(
            endpoint,
            resolve_api_key(api_key_env.as_deref())?.as_deref(),
        ))),
        BackendConfig::Record {
            endpoint,
            api_key_env,
            dir,
        } => {
            std::fs::create_dir_all(dir).map_err(|e| data_error(&dir.display().to_string(), e))?;
            let inner = HttpBackend::new(
                endpoint,
                resolve_api_key(api_key_env.as_deref())?.as_deref(),
            );
            Ok(Box::new(RecordingBackend::new(inner, dir)))
        }
    }
}

fn resolve_api_key(var: Option<&str>) -> Result<Option<String>, CliError> {
    match var {
        None => Ok(None),
        Some(name) => std::env::var(name).map(Some).map_err(|_| {
            CliError::Backend(format!("API key environment variable {name} is not set"))
        }),
    }
}

fn detect_options(config: &RunConfig, stage: &str) -> Result<DetectOptions, CliError> {
    Ok(DetectOptions {
        variant: config.prompt.variant,
        weights: config.similarity.build()?,
        llm_model_name: config.llm.model_name.clone(),
        concurrency: config.llm.concurrency,
        seed: derive_seed(config.seed, stage),
    })
}

fn avg_f1(rows: &[MetricsRow]) -> f64 {
    rows.iter()
        .find(|r| r.label == RowLabel::Average)
        .map(|r| r.f1)
        .unwrap_or(0.0)
}

// --- commands ------------------------------------------------------------------

pub fn cmd_train(config: &RunConfig) -> Result<(), CliError> {
    let train = load_corpus(&config.corpus.train)?;
    let model = SmallModel::train(train.examples(), &TrainConfig::default())
        .map_err(|e| data_error("train", e))?;
    let terms = model.vocabulary().len();
    let container = ModelContainer::new(model);
    if let Some(parent) = config.model_path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| data_error(&parent.display().to_string(), e))?;
    }
    container
        .save(&config.model_path)
        .map_err(|e| CliError::Data(e.to_string()))?;
    write_manifest(&config.output_dir, config, "train", None)?;
    println!(
        "trained on {} examples ({terms} terms) -> {}",
        train.len(),
        config.model_path.display()
    );
    Ok(())
}

pub fn cmd_calibrate(config: &RunConfig) -> Result<(), CliError> {
    let container =
        ModelContainer::load(&config.model_path).map_err(|e| CliError::Data(e.to_string()))?;
    let calib = load_corpus(&config.corpus.calibration)?;
    let calibrator = calibrate(&container.model, calib.examples(), config.alpha)
        .map_err(|e| data_error("calibrate", e))?;
    let threshold = calibrator.threshold();
    let calibrated = container.with_calibrator(calibrator);
    calibrated
        .save(&config.model_path)
        .map_err(|e| CliError::Data(e.to_string()))?;
    write_manifest(&config.output_dir, config, "calibrate", None)?;
    println!(
        "calibrated on {} examples (alpha {}, threshold {threshold:.4}) -> {}",
        calib.len(),
        config.alpha,
        config.model_path.display()
    );
    Ok(())
}

pub fn cmd_detect(config: &RunConfig) -> Result<(), CliError> {
    // The model is the predict stage's input; report its absence as that
    // stage failing.
    let container = ModelContainer::load(&config.model_path)
        .map_err(|e| CliError::Data(format!("stage predict failed: {e}")))?;
    let pool = load_corpus(config.corpus.pool())?;
    let test = load_corpus(&config.corpus.test)?;
    if test.is_empty() {
        return Err(CliError::Data(format!(
            "test corpus {} is empty",
            config.corpus.test.display()
        )));
    }
    let backend = build_backend(&config.backend)?;
    let options = detect_options(config, "detect")?;
    let output = run_detection(
        &container,
        pool.examples(),
        test.examples(),
        backend.as_ref(),
        &options,
    )
    .map_err(classify_pipeline)?;
    for warning in &output.warnings {
        eprintln!("warning: {warning}");
    }
    let counts =
        score_with_policy(&output.results, test.examples(), UnparsedPolicy::CountAsMiss)
            .map_err(classify_eval)?;
    let report = EvalReport::new(&counts);

    write_json(&config.output_dir.join("results.json"), &output.results)?;
    write_json(&config.output_dir.join("report.json"), &report)?;
    write_file(&config.output_dir.join("report.txt"), &report.render_text())?;
    write_manifest(&config.output_dir, config, "detect", Some(options.seed))?;
    println!(
        "detected {} examples (variant {}, macro avg F1 {:.2}) -> {}",
        output.results.len(),
        options.variant,
        avg_f1(&report.rows),
        config.output_dir.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    #[serde(flatten)]
    metrics: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    clarity_agreement: Option<ChiSquareResult>,
}

pub fn cmd_eval(
    config: &RunConfig,
    results_path: Option<&Path>,
    include_unrelated: bool,
    drop_unparsed: bool,
    clarity_path: Option<&Path>,
) -> Result<(), CliError> {
    let default_results = config.output_dir.join("results.json");
    let results_path = results_path.unwrap_or(&default_results);
    let data = std::fs::read_to_string(results_path)
        .map_err(|e| data_error(&results_path.display().to_string(), e))?;
    let results: Vec<DetectionResult> = serde_json::from_str(&data)
        .map_err(|e| data_error(&results_path.display().to_string(), e))?;
    let test = load_corpus(&config.corpus.test)?;
    let policy = if drop_unparsed {
        UnparsedPolicy::Drop
    } else {
        UnparsedPolicy::CountAsMiss
    };
    let counts = score_with_policy(&results, test.examples(), policy).map_err(classify_eval)?;
    let rows: Vec<MetricsRow> = metrics_with_options(&counts, include_unrelated)
        .iter()
        .map(MetricsRow::rounded)
        .collect();
    let report = EvalReport {
        scoring_policy: counts.policy(),
        evaluated: counts.evaluated(),
        unparsed: counts.unparsed(),
        rows,
    };

    let clarity_agreement = match clarity_path {
        None => None,
        Some(path) => {
            let ratings = load_clarity_jsonl(path).map_err(classify_eval)?;
            let table = clarity_contingency(&ratings).map_err(classify_eval)?;
            Some(chi_square(&table).map_err(classify_eval)?)
        }
    };

    let text = render_metrics_table(&report.rows);
    let output = EvalOutput {
        metrics: report,
        clarity_agreement,
    };
    write_json(&config.output_dir.join("eval.json"), &output)?;
    write_file(&config.output_dir.join("eval.txt"), &text)?;
    write_manifest(&config.output_dir, config, "eval", None)?;
    print!("{text}");
    if let Some(agreement) = &output.clarity_agreement {
        println!(
            "clarity agreement: chi-square {:.4}, df {}, p {:.6}",
            agreement.statistic, agreement.degrees_of_freedom, agreement.p_value
        );
    }
    Ok(())
}

pub fn cmd_ablate(config: &RunConfig) -> Result<(), CliError> {
    let container =
        ModelContainer::load(&config.model_path).map_err(|e| CliError::Data(e.to_string()))?;
    let pool = load_corpus(config.corpus.pool())?;
    let test = load_corpus(&config.corpus.test)?;
    if test.is_empty() {
        return Err(CliError::Data(format!(
            "test corpus {} is empty",
            config.corpus.test.display()
        )));
    }
    let backend = build_backend(&config.backend)?;
    let options = detect_options(config, "ablate")?;
    let report = run_ablation(
        &container,
        pool.examples(),
        test.examples(),
        backend.as_ref(),
        &options,
    )
    .map_err(classify_eval)?;
    write_json(&config.output_dir.join("ablation.json"), &report)?;
    write_file(&config.output_dir.join("ablation.txt"), &report.render_text())?;
    write_manifest(&config.output_dir, config, "ablate", Some(options.seed))?;
    println!(
        "ablated {} variants over {} examples -> {}",
        report.variants.len(),
        report.test_ids.len(),
        config.output_dir.display()
    );
    Ok(())
}

pub fn cmd_prompt_preview(config: &RunConfig, id: Option<&str>) -> Result<(), CliError> {
    let container =
        ModelContainer::load(&config.model_path).map_err(|e| CliError::Data(e.to_string()))?;
    let pool = load_corpus(config.corpus.pool())?;
    let test = load_corpus(&config.corpus.test)?;
    let example = match id {
        Some(id) => test
            .examples()
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| CliError::Data(format!("no example with id {id} in the test corpus")))?,
        None => test
            .examples()
            .first()
            .ok_or_else(|| CliError::Data("the test corpus is empty".to_owned()))?,
    };
    let prepared_pool = PreparedPool::prepare(&container.model, pool.examples())
        .map_err(|e| CliError::Data(e.to_string()))?;
    let calibrator = if config.prompt.variant.is_baseline() {
        None
    } else {
        Some(
            container
                .require_calibrator()
                .map_err(|e| CliError::Data(e.to_string()))?,
        )
    };
    let fallback_calibrator =
        tactician_core::conformal::calibrate_from_scores(&[0.0], 0.5).expect("static input");
    let options = detect_options(config, "detect")?;
    let plan = plan_prompt(
        &container.model,
        calibrator.unwrap_or(&fallback_calibrator),
        &prepared_pool,
        &options,
        &example.id,
        &example.code,
    )
    .map_err(classify_pipeline)?;
    for warning in &plan.warnings {
        eprintln!("warning: {warning}");
    }
    print!("{}", plan.bundle.rendered);
    Ok(())
}

pub fn cmd_similarity_explain(
    config: &RunConfig,
    query: &Path,
    candidate: &Path,
) -> Result<(), CliError> {
    let container =
        ModelContainer::load(&config.model_path).map_err(|e| CliError::Data(e.to_string()))?;
    let read = |path: &Path| {
        std::fs::read_to_string(path).map_err(|e| data_error(&path.display().to_string(), e))
    };
    let query_code = read(query)?;
    let candidate_code = read(candidate)?;
    let weights = config.similarity.build()?;
    let breakdown = explain(&container.model, &weights, &query_code, &candidate_code);
    println!(
        "{}",
        serde_json::to_string_pretty(&breakdown).expect("breakdown serialization cannot fail")
    );
    Ok(())
}

pub fn cmd_corpus_validate(path: &Path) -> Result<(), CliError> {
    let corpus = load_corpus(path)?;
    println!("{}: {} examples", path.display(), corpus.len());
    let counts = corpus.label_counts();
    for label in tactician_core::TacticLabel::ALL {
        println!("  {:<14}{:>6}", label.as_str(), counts[label.index()]);
    }
    let tagged = corpus
        .examples()
        .iter()
        .filter(|e| e.split.is_some())
        .count();
    if tagged > 0 {
        for split in [Split::Train, Split::Calibration, Split::Test] {
            let n = corpus.of_split(split).count();
            println!("  split {:<12}{:>6}", split.as_str(), n);
        }
    }
    Ok(())
}

pub fn cmd_corpus_split(
    config: &RunConfig,
    path: &Path,
    train_frac: f64,
    calib_frac: f64,
    out_dir: Option<&Path>,
) -> Result<(), CliError> {
    let corpus = load_corpus(path)?;
    let stage_seed = derive_seed(config.seed, "corpus_split");
    let tagged = corpus
        .split(train_frac, calib_frac, stage_seed)
        .map_err(|e| data_error("split", e))?;
    let out_dir = out_dir.unwrap_or(&config.output_dir);
    std::fs::create_dir_all(out_dir)
        .map_err(|e| data_error(&out_dir.display().to_string(), e))?;
    for (split, file) in [
        (Split::Train, "train.jsonl"),
        (Split::Calibration, "calibration.jsonl"),
        (Split::Test, "test.jsonl"),
    ] {
        let examples: Vec<_> = tagged.of_split(split).cloned().collect();
        let count = examples.len();
        let part = Corpus::from_examples(examples).map_err(|e| data_error("split", e))?;
        let target = out_dir.join(file);
        part.save_jsonl(&target)
            .map_err(|e| data_error(&target.display().to_string(), e))?;
        println!("{:<12} {count:>5} -> {}", split.as_str(), target.display());
    }
    write_manifest(out_dir, config, "corpus-split", Some(stage_seed))?;
    Ok(())
}
