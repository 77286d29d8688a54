//! `tactician` — train, calibrate, and run the tactic-detection pipeline
//! from the command line. Configuration comes from an optional TOML or JSON
//! file plus flag overrides (flags win); all randomness flows from the single
//! configured seed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::{OverrideArgs, RunConfig};

/// Failure classes, each with its own exit code so scripts can tell a bad
/// invocation (1) from bad data (2) from a misbehaving completion backend (3).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Backend(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Backend(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Backend(m) => m,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tactician", version, about = "Architectural tactic detection pipeline")]
struct Cli {
    /// Path to a TOML or JSON run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: OverrideArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the small model on the train corpus and write the model file.
    Train,
    /// Fit the conformal calibrator on the calibration corpus and store it
    /// in the model file.
    Calibrate,
    /// Run the full detection pipeline over the test corpus.
    Detect,
    /// Score detection results against the test corpus labels.
    Eval {
        /// Detection results to score (default: <output_dir>/results.json).
        #[arg(long, value_name = "FILE")]
        results: Option<PathBuf>,
        /// Include the unrelated class in the macro average.
        #[arg(long)]
        include_unrelated: bool,
        /// Drop unparsable responses instead of counting them as misses.
        #[arg(long)]
        drop_unparsed: bool,
        /// Clarity ratings (JSONL) to test for rater agreement.
        #[arg(long, value_name = "FILE")]
        clarity: Option<PathBuf>,
    },
    /// Run the five-variant prompt ablation over the test corpus.
    Ablate,
    /// Inspect prompts without calling a backend.
    Prompt {
        #[command(subcommand)]
        command: PromptCommand,
    },
    /// Inspect the demonstration-selection similarity measure.
    Similarity {
        #[command(subcommand)]
        command: SimilarityCommand,
    },
    /// Validate or split a corpus file.
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
}

#[derive(Debug, Subcommand)]
enum PromptCommand {
    /// Print the prompt that detect would send for one test example.
    Preview {
        /// Test example id (default: the first test example).
        #[arg(long)]
        id: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
enum SimilarityCommand {
    /// Print the similarity breakdown between two code snippet files.
    Explain {
        /// File holding the query snippet.
        query: PathBuf,
        /// File holding the candidate snippet.
        candidate: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum CorpusCommand {
    /// Check a JSONL corpus file and print its label distribution.
    Validate { path: PathBuf },
    /// Shuffle a corpus into train/calibration/test files.
    Split {
        path: PathBuf,
        /// Fraction of examples for the train split.
        #[arg(long, default_value_t = 0.6)]
        train_frac: f64,
        /// Fraction of examples for the calibration split.
        #[arg(long, default_value_t = 0.2)]
        calib_frac: f64,
        /// Directory for the three split files (default: the output dir).
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render();
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{rendered}");
                return ExitCode::SUCCESS;
            }
            eprint!("{rendered}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let base = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let config = cli.overrides.apply(base)?;
    config.validate()?;

    match cli.command {
        Command::Train => commands::cmd_train(&config),
        Command::Calibrate => commands::cmd_calibrate(&config),
        Command::Detect => commands::cmd_detect(&config),
        Command::Eval {
            results,
            include_unrelated,
            drop_unparsed,
            clarity,
        } => commands::cmd_eval(
            &config,
            results.as_deref(),
            include_unrelated,
            drop_unparsed,
            clarity.as_deref(),
        ),
        Command::Ablate => commands::cmd_ablate(&config),
        Command::Prompt {
            command: PromptCommand::Preview { id },
        } => commands::cmd_prompt_preview(&config, id.as_deref()),
        Command::Similarity {
            command: SimilarityCommand::Explain { query, candidate },
        } => commands::cmd_similarity_explain(&config, &query, &candidate),
        Command::Corpus { command } => match command {
            CorpusCommand::Validate { path } => commands::cmd_corpus_validate(&path),
            CorpusCommand::Split {
                path,
                train_frac,
                calib_frac,
                out_dir,
            } => commands::cmd_corpus_split(
                &config,
                &path,
                train_frac,
                calib_frac,
                out_dir.as_deref(),
            ),
        },
    }
}
