//! BM25 inverted index — the sparse retrieval channel.
//!
//! Scores use the +1-smoothed IDF `ln(1 + (N - df + 0.5) / (df + 0.5))`,
//! which is non-negative for every df in [0, N]; fusion's min-max
//! normalization relies on that lower bound.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::corpus::DocumentChunk;
use crate::error::{Error, Result};
use crate::text;

/// Which retrieval channel produced a hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Dense,
    Sparse,
    Graph,
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Channel::Dense => write!(f, "dense"),
            Channel::Sparse => write!(f, "sparse"),
            Channel::Graph => write!(f, "graph"),
        }
    }
}

/// One scored retrieval result. For the graph channel the id names an
/// evidence path rather than a chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub id: String,
    pub score: f64,
    pub channel: Channel,
}

/// BM25 parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BmParams {
    pub k1: f64,
    pub b: f64,
}

impl Default for BmParams {
    fn default() -> Self {
        BmParams { k1: 1.2, b: 0.75 }
    }
}

const FORMAT_VERSION: u32 = 1;

/// Immutable BM25 inverted index over document chunks.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseIndex {
    params: BmParams,
    /// term -> postings sorted by chunk id.
    postings: BTreeMap<String, Vec<Posting>>,
    doc_lengths: BTreeMap<String, usize>,
    avg_doc_length: f64,
    doc_count: usize,
    /// Terms excluded from indexing and queries. Empty by default.
    stopwords: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Posting {
    chunk_id: String,
    tf: usize,
}

/// On-disk layout; `BTreeMap` keys keep rebuilds byte-identical.
#[derive(Serialize, Deserialize)]
struct SparseIndexFile {
    format_version: u32,
    k1: f64,
    b: f64,
    doc_count: usize,
    avg_doc_length: f64,
    #[serde(default)]
    stopwords: BTreeSet<String>,
    doc_lengths: BTreeMap<String, usize>,
    postings: BTreeMap<String, Vec<Posting>>,
}

impl SparseIndex {
    /// Build an index over `chunks`. Fails on duplicate chunk ids.
    pub fn build(chunks: &[DocumentChunk], params: BmParams) -> Result<Self> {
        Self::build_with_stopwords(chunks, params, &[])
    }

    /// Build with a stopword list excluded from the index and from queries.
    pub fn build_with_stopwords(
        chunks: &[DocumentChunk],
        params: BmParams,
        stopwords: &[String],
    ) -> Result<Self> {
        let stopwords: BTreeSet<String> = stopwords.iter().map(|s| s.to_lowercase()).collect();
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths: BTreeMap<String, usize> = BTreeMap::new();

        for chunk in chunks {
            let mut tokens = text::tokenize(&chunk.text);
            if !stopwords.is_empty() {
                tokens.retain(|t| !stopwords.contains(t));
            }
            if doc_lengths
                .insert(chunk.chunk_id.clone(), tokens.len())
                .is_some()
            {
                return Err(Error::DuplicateChunkId(chunk.chunk_id.clone()));
            }
            let mut freqs: BTreeMap<&str, usize> = BTreeMap::new();
            for token in &tokens {
                *freqs.entry(token).or_insert(0) += 1;
            }
            for (term, tf) in freqs {
                postings.entry(term.to_string()).or_default().push(Posting {
                    chunk_id: chunk.chunk_id.clone(),
                    tf,
                });
            }
        }
        for list in postings.values_mut() {
            list.sort_by(|a, b| a.chunk_id.cmp(&b.chunk_id));
        }

        let doc_count = doc_lengths.len();
        let avg_doc_length = if doc_count == 0 {
            0.0
        } else {
            doc_lengths.values().sum::<usize>() as f64 / doc_count as f64
        };

        Ok(SparseIndex {
            params,
            postings,
            doc_lengths,
            avg_doc_length,
            doc_count,
            stopwords,
        })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn params(&self) -> BmParams {
        self.params
    }

    pub fn contains(&self, chunk_id: &str) -> bool {
        self.doc_lengths.contains_key(chunk_id)
    }

    /// All indexed chunk ids, ascending.
    pub fn chunk_ids(&self) -> impl Iterator<Item = &str> {
        self.doc_lengths.keys().map(String::as_str)
    }

    fn term_frequency(&self, term: &str, chunk_id: &str) -> usize {
        self.postings
            .get(term)
            .and_then(|list| {
                list.binary_search_by(|p| p.chunk_id.as_str().cmp(chunk_id))
                    .ok()
                    .map(|i| list[i].tf)
            })
            .unwrap_or(0)
    }

    fn idf(&self, term: &str) -> f64 {
        let df = self.postings.get(term).map_or(0, Vec::len) as f64;
        let n = self.doc_count as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// BM25 score of one chunk against pre-tokenized query terms. Terms
    /// absent from the chunk contribute 0.
    pub fn bm25_score(&self, query_tokens: &[String], chunk_id: &str) -> Result<f64> {
        let len = *self
            .doc_lengths
            .get(chunk_id)
            .ok_or_else(|| Error::UnknownChunkId(chunk_id.to_string()))?;
        let BmParams { k1, b } = self.params;
        let norm = if self.avg_doc_length > 0.0 {
            1.0 - b + b * len as f64 / self.avg_doc_length
        } else {
            1.0
        };

        let mut score = 0.0;
        for term in query_tokens {
            let tf = self.term_frequency(term, chunk_id) as f64;
            if tf > 0.0 {
                score += self.idf(term) * tf * (k1 + 1.0) / (tf + k1 * norm);
            }
        }
        Ok(score)
    }

    /// Top-k chunks for a free-text query, descending by BM25 score with
    /// ties broken by ascending chunk id. Zero-score chunks are excluded.
    pub fn search(&self, query: &str, k: usize) -> Vec<ScoredHit> {
        let mut query_tokens = text::tokenize(query);
        if !self.stopwords.is_empty() {
            query_tokens.retain(|t| !self.stopwords.contains(t));
        }
        let candidates: BTreeSet<&str> = query_tokens
            .iter()
            .filter_map(|t| self.postings.get(t))
            .flat_map(|list| list.iter().map(|p| p.chunk_id.as_str()))
            .collect();
        let candidates: Vec<&str> = candidates.into_iter().collect();

        #[cfg(feature = "parallel")]
        let scored_iter = candidates.par_iter();
        #[cfg(not(feature = "parallel"))]
        let scored_iter = candidates.iter();

        let mut hits: Vec<ScoredHit> = scored_iter
            .map(|id| ScoredHit {
                id: id.to_string(),
                // Candidates come from the postings, so the id is known.
                score: self.bm25_score(&query_tokens, id).expect("indexed id"),
                channel: Channel::Sparse,
            })
            .filter(|h| h.score > 0.0)
            .collect();

        hits.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.id.cmp(&b.id))
        });
        hits.truncate(k);
        hits
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = SparseIndexFile {
            format_version: FORMAT_VERSION,
            k1: self.params.k1,
            b: self.params.b,
            doc_count: self.doc_count,
            avg_doc_length: self.avg_doc_length,
            stopwords: self.stopwords.clone(),
            doc_lengths: self.doc_lengths.clone(),
            postings: self.postings.clone(),
        };
        let mut bytes = serde_json::to_vec_pretty(&file)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: SparseIndexFile = serde_json::from_slice(&std::fs::read(path)?)?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported sparse index format_version {}",
                file.format_version
            )));
        }
        Ok(SparseIndex {
            params: BmParams {
                k1: file.k1,
                b: file.b,
            },
            postings: file.postings,
            doc_lengths: file.doc_lengths,
            avg_doc_length: file.avg_doc_length,
            doc_count: file.doc_count,
            stopwords: file.stopwords,
        })
    }
}
