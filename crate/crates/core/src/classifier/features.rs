//! tf-idf feature extraction over token sequences.
//!
//! Term frequency is the raw token count; inverse document frequency is
//! smoothed as `ln((1 + N) / (1 + df)) + 1`; every document vector is
//! L2-normalized. The vocabulary is frozen at training time, with term
//! indices assigned in lexicographic order so serialized models are stable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tokenizer::TokenSequence;

/// A sparse, non-negative document vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    entries: BTreeMap<u32, f64>,
    norm: f64,
}

impl FeatureVector {
    /// Build from raw (index, weight) entries, dropping zero weights and
    /// recording the L2 magnitude.
    pub fn from_entries(entries: BTreeMap<u32, f64>) -> FeatureVector {
        let entries: BTreeMap<u32, f64> =
            entries.into_iter().filter(|(_, w)| *w != 0.0).collect();
        let norm = entries.values().map(|w| w * w).sum::<f64>().sqrt();
        FeatureVector { entries, norm }
    }

    pub fn entries(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.entries.iter().map(|(&i, &w)| (i, w))
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries.get(&index).copied().unwrap_or(0.0)
    }

    /// L2 magnitude of the entries.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sparse dot product.
    pub fn dot(&self, other: &FeatureVector) -> f64 {
        // Iterate the smaller map, probe the larger.
        let (small, large) = if self.entries.len() <= other.entries.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .entries
            .iter()
            .map(|(i, w)| w * large.get(*i))
            .sum()
    }

    /// Rescale to unit L2 norm; zero vectors stay zero.
    pub fn normalized(mut self) -> FeatureVector {
        if self.norm > 0.0 {
            for w in self.entries.values_mut() {
                *w /= self.norm;
            }
            self.norm = 1.0;
        }
        self
    }
}

/// Term-to-index map with document frequencies, frozen at training time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    terms: BTreeMap<String, TermEntry>,
    doc_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct TermEntry {
    index: u32,
    df: u32,
}

impl Vocabulary {
    /// Collect every distinct token across the documents, assign indices in
    /// lexicographic term order, and count per-term document frequencies.
    pub fn build(docs: &[TokenSequence]) -> Vocabulary {
        let mut dfs: BTreeMap<&str, u32> = BTreeMap::new();
        for doc in docs {
            for token in doc.token_set() {
                *dfs.entry(token).or_insert(0) += 1;
            }
        }
        let terms = dfs
            .into_iter()
            .enumerate()
            .map(|(index, (term, df))| {
                (
                    term.to_owned(),
                    TermEntry {
                        index: index as u32,
                        df,
                    },
                )
            })
            .collect();
        Vocabulary {
            terms,
            doc_count: docs.len() as u32,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Smoothed inverse document frequency for a known term.
    fn idf(&self, df: u32) -> f64 {
        (f64::from(1 + self.doc_count) / f64::from(1 + df)).ln() + 1.0
    }

    /// L2-normalized tf-idf vector. Out-of-vocabulary tokens are ignored; a
    /// document with no known terms yields the zero vector.
    pub fn vectorize(&self, doc: &TokenSequence) -> FeatureVector {
        let mut tf: BTreeMap<u32, f64> = BTreeMap::new();
        let mut idfs: BTreeMap<u32, f64> = BTreeMap::new();
        for token in doc.tokens() {
            if let Some(entry) = self.terms.get(token.as_str()) {
                *tf.entry(entry.index).or_insert(0.0) += 1.0;
                idfs.entry(entry.index).or_insert_with(|| self.idf(entry.df));
            }
        }
        let weighted = tf
            .into_iter()
            .map(|(index, count)| (index, count * idfs[&index]))
            .collect();
        FeatureVector::from_entries(weighted).normalized()
    }
}
