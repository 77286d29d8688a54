//! Corpus loading, validation, and stratified train/calibration/test splitting.
//!
//! A corpus is a line-delimited JSON file: one record per line with fields
//! `id`, `code`, `label`, and an optional `split`. Labels come from a closed
//! six-value universe. Splitting is stratified by label with round-boundary
//! cut points, so every split preserves the corpus's class balance to within
//! one example per label, and is deterministic for a fixed seed.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The closed universe of architectural-tactic labels, in canonical order.
///
/// The order is load-bearing: it fixes the score-vector layout in the
/// classifier, deterministic tie-breaking, and the order in which label lists
/// are rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TacticLabel {
    Audit,
    Authenticate,
    Heartbeat,
    Pooling,
    Scheduler,
    Unrelated,
}

impl TacticLabel {
    /// Number of labels in the universe.
    pub const COUNT: usize = 6;

    /// Every label, in canonical order.
    pub const ALL: [TacticLabel; TacticLabel::COUNT] = [
        TacticLabel::Audit,
        TacticLabel::Authenticate,
        TacticLabel::Heartbeat,
        TacticLabel::Pooling,
        TacticLabel::Scheduler,
        TacticLabel::Unrelated,
    ];

    /// Canonical lowercase name.
    pub fn as_str(self) -> &'static str {
        match self {
            TacticLabel::Audit => "audit",
            TacticLabel::Authenticate => "authenticate",
            TacticLabel::Heartbeat => "heartbeat",
            TacticLabel::Pooling => "pooling",
            TacticLabel::Scheduler => "scheduler",
            TacticLabel::Unrelated => "unrelated",
        }
    }

    /// Position of this label in [`TacticLabel::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    /// Inverse of [`TacticLabel::index`].
    pub fn from_index(index: usize) -> Option<TacticLabel> {
        TacticLabel::ALL.get(index).copied()
    }
}

impl fmt::Display for TacticLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Error for a label string outside the closed universe.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown label {input:?} (expected one of: audit, authenticate, heartbeat, pooling, scheduler, unrelated)")]
pub struct ParseLabelError {
    pub input: String,
}

impl FromStr for TacticLabel {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TacticLabel::ALL
            .into_iter()
            .find(|label| s.eq_ignore_ascii_case(label.as_str()))
            .ok_or_else(|| ParseLabelError { input: s.to_owned() })
    }
}

impl TryFrom<String> for TacticLabel {
    type Error = ParseLabelError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<TacticLabel> for String {
    fn from(label: TacticLabel) -> String {
        label.as_str().to_owned()
    }
}

/// Partition an example belongs to. An absent split means "unassigned".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Split {
    Train,
    Calibration,
    Test,
}

impl Split {
    /// Canonical lowercase name.
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Calibration => "calibration",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Error for a split string outside {train, calibration, test}.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown split {input:?} (expected one of: train, calibration, test)")]
pub struct ParseSplitError {
    pub input: String,
}

impl FromStr for Split {
    type Err = ParseSplitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Split::Train, Split::Calibration, Split::Test]
            .into_iter()
            .find(|split| s.eq_ignore_ascii_case(split.as_str()))
            .ok_or_else(|| ParseSplitError { input: s.to_owned() })
    }
}

impl TryFrom<String> for Split {
    type Error = ParseSplitError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Split> for String {
    fn from(split: Split) -> String {
        split.as_str().to_owned()
    }
}

/// One labeled code snippet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub code: String,
    pub label: TacticLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

/// Errors arising from corpus I/O, validation, or splitting.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: {source}")]
    UnknownLabel {
        path: PathBuf,
        line: usize,
        #[source]
        source: ParseLabelError,
    },
    #[error("{path}:{line}: duplicate id {id:?}")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },
    #[error("{path}:{line}: record {id:?} has empty code")]
    EmptyCode {
        path: PathBuf,
        line: usize,
        id: String,
    },
    #[error(
        "invalid split fractions: train {train} and calibration {calib} must be non-negative and sum to at most 1"
    )]
    InvalidFractions { train: f64, calib: f64 },
    #[error(
        "label {label} has only {available} example(s): the {split} split would be empty"
    )]
    SplitTooSmall {
        label: TacticLabel,
        split: Split,
        available: usize,
    },
}

/// An immutable, validated collection of labeled examples.
///
/// Invariants enforced at construction: ids are unique and code is non-empty.
/// Per-label tallies are always derived from the examples, so they cannot
/// drift out of sync.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    examples: Vec<LabeledExample>,
}

/// Fractions smaller than this are treated as "split not requested" so that
/// floating-point dust (e.g. 1/3 + 2/3 summing to 0.9999999999999999) does not
/// conjure a phantom split that then fails the emptiness check.
const MIN_REQUESTED_FRACTION: f64 = 1e-9;

impl Corpus {
    /// Build a corpus from in-memory examples, enforcing the id-uniqueness and
    /// non-empty-code invariants. Record positions (1-based) are reported as
    /// line numbers.
    pub fn from_examples(examples: Vec<LabeledExample>) -> Result<Corpus, CorpusError> {
        let origin = PathBuf::from("<memory>");
        let mut seen = HashSet::new();
        for (pos, example) in examples.iter().enumerate() {
            validate_example(example, &origin, pos + 1, &mut seen)?;
        }
        Ok(Corpus { examples })
    }

    /// Load a line-delimited JSON corpus. Whitespace-only lines are skipped;
    /// every error names the offending line.
    pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })?;
        let reader = BufReader::new(file);
        let mut examples = Vec::new();
        let mut seen = HashSet::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|source| CorpusError::Io {
                path: path.to_owned(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawRecord =
                serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
                    path: path.to_owned(),
                    line: line_no,
                    message: e.to_string(),
                })?;
            let label = raw
                .label
                .parse()
                .map_err(|source| CorpusError::UnknownLabel {
                    path: path.to_owned(),
                    line: line_no,
                    source,
                })?;
            let split = match raw.split {
                None => None,
                Some(s) => Some(s.parse().map_err(|e: ParseSplitError| {
                    CorpusError::MalformedRecord {
                        path: path.to_owned(),
                        line: line_no,
                        message: e.to_string(),
                    }
                })?),
            };
            let example = LabeledExample {
                id: raw.id,
                code: raw.code,
                label,
                split,
            };
            validate_example(&example, path, line_no, &mut seen)?;
            examples.push(example);
        }
        Ok(Corpus { examples })
    }

    /// Write the corpus in the same line-delimited JSON format it is loaded
    /// from, one record per line, preserving example order.
    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let path = path.as_ref();
        let io_err = |source| CorpusError::Io {
            path: path.to_owned(),
            source,
        };
        let file = File::create(path).map_err(io_err)?;
        let mut writer = BufWriter::new(file);
        for example in &self.examples {
            let line = serde_json::to_string(example).expect("corpus records serialize");
            writer.write_all(line.as_bytes()).map_err(io_err)?;
            writer.write_all(b"\n").map_err(io_err)?;
        }
        writer.flush().map_err(io_err)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn iter(&self) -> impl Iterator<Item = &LabeledExample> {
        self.examples.iter()
    }

    /// Examples assigned to the given split.
    pub fn of_split(&self, split: Split) -> impl Iterator<Item = &LabeledExample> {
        self.examples
            .iter()
            .filter(move |e| e.split == Some(split))
    }

    /// Per-label tallies, indexed by [`TacticLabel::index`].
    pub fn label_counts(&self) -> [usize; TacticLabel::COUNT] {
        let mut counts = [0usize; TacticLabel::COUNT];
        for example in &self.examples {
            counts[example.label.index()] += 1;
        }
        counts
    }

    /// Assign every example to train/calibration/test, stratified by label.
    ///
    /// Within each label the examples are shuffled (seeded, deterministic) and
    /// cut at round-boundary points: the first `round(train_frac * n)` go to
    /// train, up to `round((train_frac + calib_frac) * n)` to calibration, the
    /// remainder to test. Rounding both boundaries keeps every split within
    /// one example of its requested per-label share. Example order in the
    /// returned corpus matches `self`; only the `split` fields change.
    ///
    /// Errors if the fractions are invalid or if any label would leave a
    /// requested (positive-fraction) split empty.
    pub fn split(
        &self,
        train_frac: f64,
        calib_frac: f64,
        seed: u64,
    ) -> Result<Corpus, CorpusError> {
        if !train_frac.is_finite()
            || !calib_frac.is_finite()
            || train_frac < 0.0
            || calib_frac < 0.0
            || train_frac + calib_frac > 1.0 + 1e-12
        {
            return Err(CorpusError::InvalidFractions {
                train: train_frac,
                calib: calib_frac,
            });
        }
        let test_frac = (1.0 - train_frac - calib_frac).max(0.0);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut assigned = self.examples.clone();
        for label in TacticLabel::ALL {
            let mut indices: Vec<usize> = self
                .examples
                .iter()
                .enumerate()
                .filter(|(_, e)| e.label == label)
                .map(|(i, _)| i)
                .collect();
            if indices.is_empty() {
                continue;
            }
            indices.shuffle(&mut rng);
            let n = indices.len();
            let cut1 = round_boundary(train_frac, n);
            let cut2 = round_boundary(train_frac + calib_frac, n).max(cut1);
            let sizes = [
                (Split::Train, train_frac, cut1),
                (Split::Calibration, calib_frac, cut2 - cut1),
                (Split::Test, test_frac, n - cut2),
            ];
            for (split, frac, size) in sizes {
                if frac > MIN_REQUESTED_FRACTION && size == 0 {
                    return Err(CorpusError::SplitTooSmall {
                        label,
                        split,
                        available: n,
                    });
                }
            }
            for (pos, &i) in indices.iter().enumerate() {
                assigned[i].split = Some(if pos < cut1 {
                    Split::Train
                } else if pos < cut2 {
                    Split::Calibration
                } else {
                    Split::Test
                });
            }
        }
        Ok(Corpus { examples: assigned })
    }
}

fn round_boundary(frac: f64, n: usize) -> usize {
    ((frac * n as f64).round() as usize).min(n)
}

fn validate_example(
    example: &LabeledExample,
    path: &Path,
    line: usize,
    seen: &mut HashSet<String>,
) -> Result<(), CorpusError> {
    if example.code.is_empty() {
        return Err(CorpusError::EmptyCode {
            path: path.to_owned(),
            line,
            id: example.id.clone(),
        });
    }
    if !seen.insert(example.id.clone()) {
        return Err(CorpusError::DuplicateId {
            path: path.to_owned(),
            line,
            id: example.id.clone(),
        });
    }
    Ok(())
}

/// Raw wire form of one record, before label/split validation.
#[derive(Deserialize)]
struct RawRecord {
    id: String,
    code: String,
    label: String,
    #[serde(default)]
    split: Option<String>,
}
