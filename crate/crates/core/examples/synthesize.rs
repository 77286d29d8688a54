//! Write a balanced synthetic corpus as JSONL, for demos and fixtures.
//!
//! Usage: synthesize [PER_LABEL] [LABEL_NOISE] [SEED] [OUT_FILE]

use tactician_core::synthetic::{generate_balanced, SyntheticConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let defaults = SyntheticConfig::default();
    let per_label: usize = args
        .next()
        .map(|a| a.parse().expect("PER_LABEL must be an integer"))
        .unwrap_or(defaults.per_label);
    let label_noise: f64 = args
        .next()
        .map(|a| a.parse().expect("LABEL_NOISE must be a float"))
        .unwrap_or(defaults.label_noise);
    let seed: u64 = args
        .next()
        .map(|a| a.parse().expect("SEED must be an integer"))
        .unwrap_or(defaults.seed);
    let out = args.next().unwrap_or_else(|| "corpus.jsonl".to_owned());

    let corpus = generate_balanced(&SyntheticConfig {
        per_label,
        label_noise,
        seed,
    });
    corpus.save_jsonl(&out).expect("failed to write corpus");
    println!("wrote {} examples to {out}", corpus.len());
}
