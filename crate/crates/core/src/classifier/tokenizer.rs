//! Lexical tokenizer for code snippets.
//!
//! Splits identifiers on camelCase, snake_case, acronym, and letter/digit
//! boundaries, lowercases everything, drops comments and the contents of
//! string/char literals (the quote delimiters survive as tokens), and keeps
//! keywords and single-character operators as ordinary tokens. The token
//! stream is what the feature builder and the lexical-overlap kernel consume.

use std::collections::BTreeSet;

/// An ordered list of normalized lexical tokens.
///
/// Invariant: no token is empty. Tokenization is deterministic and idempotent:
/// re-tokenizing a rendered sequence reproduces the sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    tokens: Vec<String>,
}

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The set view of the sequence, for lexical-overlap comparisons.
    pub fn token_set(&self) -> BTreeSet<&str> {
        self.tokens.iter().map(String::as_str).collect()
    }

    /// Render the sequence as space-joined text. `tokenize(render(t))`
    /// reproduces `t` exactly.
    pub fn render(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Tokenize a code snippet. Never fails; degenerate input yields an empty
/// sequence.
pub fn tokenize(code: &str) -> TokenSequence {
    let mut tokens = Vec::new();
    let chars: Vec<char> = code.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                i += 1;
            }
            i = (i + 2).min(chars.len());
        } else if c == '"' || c == '\'' {
            // Keep the delimiters, drop the literal contents.
            tokens.push(c.to_string());
            i += 1;
            while i < chars.len() && chars[i] != c {
                i += if chars[i] == '\\' { 2 } else { 1 };
            }
            if i < chars.len() {
                tokens.push(c.to_string());
                i += 1;
            }
        } else if c.is_alphanumeric() {
            let start = i;
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            split_word(&chars[start..i], &mut tokens);
        } else {
            if !c.is_whitespace() && c != '_' {
                tokens.push(c.to_string());
            }
            i += 1;
        }
    }
    TokenSequence { tokens }
}

/// Split one alphanumeric run on camelCase, acronym, and letter/digit
/// boundaries, lowercasing each part.
fn split_word(chars: &[char], out: &mut Vec<String>) {
    let mut part = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if !part.is_empty() {
            let prev = chars[i - 1];
            let acronym_end = prev.is_uppercase()
                && c.is_uppercase()
                && chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            let boundary = (prev.is_lowercase() && c.is_uppercase())
                || acronym_end
                || (prev.is_alphabetic() && c.is_numeric())
                || (prev.is_numeric() && c.is_alphabetic());
            if boundary {
                out.push(std::mem::take(&mut part));
            }
        }
        // The filter keeps the token re-tokenizable: some lowercase
        // expansions emit combining marks that are not alphanumeric ('İ' →
        // "i" + combining dot), and some uppercase letters have no lowercase
        // form at all (math alphanumerics like '𝕊'); either would split the
        // token on a second pass.
        part.extend(
            c.to_lowercase()
                .filter(|lc| lc.is_alphanumeric() && !lc.is_uppercase()),
        );
    }
    if !part.is_empty() {
        out.push(part);
    }
}
