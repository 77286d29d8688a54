//! Synthetic corpora of small Java classes with label-specific marker
//! identifiers, used by tests, benchmarks, and the bundled end-to-end
//! fixture.
//!
//! Each tactic label owns a pool of marker nouns and verbs that show up as
//! class, field, and method names, so a bag-of-tokens model can separate the
//! labels while a configurable fraction of examples carries a deliberately
//! wrong label (label noise). Generation is fully driven by a seeded RNG:
//! the same configuration always yields byte-identical corpora.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::corpus::{Corpus, LabeledExample, TacticLabel};

/// Knobs for [`generate_balanced`].
#[derive(Debug, Clone, Copy)]
pub struct SyntheticConfig {
    /// Examples generated per label concept (before label noise).
    pub per_label: usize,
    /// Probability that an example's recorded label is redrawn uniformly
    /// from all labels, independent of its content.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> SyntheticConfig {
        SyntheticConfig {
            per_label: 20,
            label_noise: 0.08,
            seed: 17,
        }
    }
}

struct LabelTheme {
    nouns: &'static [&'static str],
    verbs: &'static [&'static str],
}

/// Marker vocabulary per label, indexed by [`TacticLabel::index`].
const THEMES: [LabelTheme; TacticLabel::COUNT] = [
    LabelTheme {
        nouns: &["audit", "trail", "ledger", "journal"],
        verbs: &["append", "record", "persist"],
    },
    LabelTheme {
        nouns: &["credential", "login", "password", "identity"],
        verbs: &["verify", "challenge", "grant"],
    },
    LabelTheme {
        nouns: &["heartbeat", "pulse", "liveness", "beacon"],
        verbs: &["beat", "emit", "observe"],
    },
    LabelTheme {
        nouns: &["pool", "lease", "reservoir", "recycler"],
        verbs: &["acquire", "release", "borrow"],
    },
    LabelTheme {
        nouns: &["scheduler", "cron", "timer", "calendar"],
        verbs: &["schedule", "dispatch", "trigger"],
    },
    LabelTheme {
        nouns: &["widget", "parser", "buffer", "matrix"],
        verbs: &["compute", "render", "transform"],
    },
];

/// Names shared across all labels so the feature spaces overlap a little.
const FILLER_NOUNS: [&str; 6] = ["handler", "service", "manager", "context", "config", "helper"];
const FILLER_VERBS: [&str; 3] = ["init", "close", "reset"];

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

fn pick<'a>(rng: &mut ChaCha20Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

/// One small Java class themed around `concept`'s markers.
fn synthesize_snippet(rng: &mut ChaCha20Rng, concept: TacticLabel, index: usize) -> String {
    let theme = &THEMES[concept.index()];
    let noun_a = pick(rng, theme.nouns);
    let noun_b = pick(rng, theme.nouns);
    let verb_a = pick(rng, theme.verbs);
    let verb_b = pick(rng, theme.verbs);
    let filler_noun = pick(rng, &FILLER_NOUNS);
    let filler_verb = pick(rng, &FILLER_VERBS);
    let bound = rng.gen_range(2..20);
    format!(
        "class {class_noun}{class_filler}{index} {{\n\
         \x20   private {field_type} {noun_a}{field_filler};\n\
         \x20   void {verb_a}{method_noun}(int limit) {{\n\
         \x20       for (int i = 0; i < limit; i++) {{\n\
         \x20           {noun_a}{field_filler}.{verb_b}(i + {bound});\n\
         \x20       }}\n\
         \x20       {noun_a}{field_filler}.{filler_verb}();\n\
         \x20   }}\n\
         }}\n",
        class_noun = capitalize(noun_b),
        class_filler = capitalize(filler_noun),
        field_type = capitalize(noun_a),
        field_filler = capitalize(filler_noun),
        method_noun = capitalize(noun_b),
    )
}

fn maybe_noisy_label(rng: &mut ChaCha20Rng, concept: TacticLabel, noise: f64) -> TacticLabel {
    if noise > 0.0 && rng.gen::<f64>() < noise {
        TacticLabel::ALL[rng.gen_range(0..TacticLabel::COUNT)]
    } else {
        concept
    }
}

/// `per_label` examples per label concept, in canonical label order. With
/// nonzero noise the recorded label counts drift slightly from balance; the
/// content always follows the concept.
pub fn generate_balanced(config: &SyntheticConfig) -> Corpus {
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut examples = Vec::with_capacity(config.per_label * TacticLabel::COUNT);
    for concept in TacticLabel::ALL {
        for j in 0..config.per_label {
            let code = synthesize_snippet(&mut rng, concept, j);
            let label = maybe_noisy_label(&mut rng, concept, config.label_noise);
            examples.push(LabeledExample {
                id: format!("syn-{}-{j:03}", concept.as_str()),
                code,
                label,
                split: None,
            });
        }
    }
    Corpus::from_examples(examples).expect("generated ids are unique")
}

/// `total` examples whose concepts are drawn uniformly at random — an i.i.d.
/// sample, the shape calibration/test splits need for coverage experiments.
pub fn generate_iid(total: usize, label_noise: f64, seed: u64) -> Corpus {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let examples = (0..total)
        .map(|i| {
            let concept = TacticLabel::ALL[rng.gen_range(0..TacticLabel::COUNT)];
            let code = synthesize_snippet(&mut rng, concept, i);
            let label = maybe_noisy_label(&mut rng, concept, label_noise);
            LabeledExample {
                id: format!("syn-{i:04}"),
                code,
                label,
                split: None,
            }
        })
        .collect();
    Corpus::from_examples(examples).expect("generated ids are unique")
}
