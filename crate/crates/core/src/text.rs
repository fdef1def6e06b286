//! Shared tokenizer and text-similarity helpers.
//!
//! One tokenizer serves the whole crate: the sparse index, chunk token
//! accounting, prompt budgets, and the automatic metrics all count tokens
//! the same way, so a "512-token chunk" means the same thing everywhere.

use std::collections::{HashMap, HashSet};

use unicode_normalization::UnicodeNormalization;

/// Lowercase, NFC-normalize, and split on any non-alphanumeric character.
/// Empty tokens are dropped; no stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    text.nfc()
        .collect::<String>()
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Number of tokens `tokenize` would produce, without allocating them.
pub fn token_count(text: &str) -> usize {
    token_spans(text).len()
}

/// Byte range of one token in the original (un-normalized) string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

/// Token byte spans over the original string, using the same boundary rule
/// as [`tokenize`] (maximal alphanumeric runs). Lets the chunker cut text at
/// token boundaries while reproducing the source bytes exactly.
pub fn token_spans(text: &str) -> Vec<TokenSpan> {
    let mut spans = Vec::new();
    let mut current: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if current.is_none() {
                current = Some(i);
            }
        } else if let Some(start) = current.take() {
            spans.push(TokenSpan { start, end: i });
        }
    }
    if let Some(start) = current {
        spans.push(TokenSpan {
            start,
            end: text.len(),
        });
    }
    spans
}

/// Multiset of n-grams as joined strings (tokens separated by `\x1f`).
pub fn ngram_counts(tokens: &[String], n: usize) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for window in tokens.windows(n) {
        *counts.entry(window.join("\u{1f}")).or_insert(0) += 1;
    }
    counts
}

/// Set of n-grams as joined strings.
pub fn ngram_set(tokens: &[String], n: usize) -> HashSet<String> {
    ngram_counts(tokens, n).into_keys().collect()
}

/// Jaccard similarity of two sets; 0 when both are empty.
pub fn jaccard<T: std::hash::Hash + Eq>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Token-n-gram Jaccard similarity of two texts.
pub fn ngram_jaccard(a: &str, b: &str, n: usize) -> f64 {
    let sa = ngram_set(&tokenize(a), n);
    let sb = ngram_set(&tokenize(b), n);
    jaccard(&sa, &sb)
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a 64-bit hash with a seed mixed into the offset basis. Stable across
/// platforms and releases; seed 0 is plain FNV-1a.
pub fn fnv1a64(bytes: &[u8], seed: u64) -> u64 {
    let mut hash = FNV_OFFSET ^ seed;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// 16-hex-digit rendering of [`fnv1a64`], used for audit and replay keys.
pub fn fnv1a64_hex(bytes: &[u8], seed: u64) -> String {
    format!("{:016x}", fnv1a64(bytes, seed))
}
