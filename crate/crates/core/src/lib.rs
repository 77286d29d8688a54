//! Architectural tactic detection via small-model-augmented prompting.
//!
//! The pipeline trains a lightweight token-feature classifier on labeled Java
//! snippets, wraps it with split conformal prediction to obtain a calibrated
//! candidate-label set, picks in-context demonstrations by hybrid code
//! similarity (semantic + lexical + syntactic), assembles a chain-of-thought
//! prompt around the candidates, and sends it to a chat-completion backend.
//! An evaluation harness scores the parsed answers (per-label P/R/F1) and
//! runs the component ablations.
//!
//! Inner scoring loops (similarity ranking, batch prediction) run on rayon
//! when the `parallel` feature is enabled (default) and fall back to
//! sequential iterators otherwise; results are identical either way.

pub mod classifier;
pub mod conformal;
pub mod corpus;
pub mod eval;
pub mod llm;
pub mod pipeline;
pub mod promptkit;
pub mod similarity;
pub mod synthetic;

pub use corpus::{Corpus, LabeledExample, Split, TacticLabel};

/// Library version, stamped into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
