//! Taxonomy labeling and BM25 relevance filtering of chunks.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::corpus::{DocumentChunk, KeywordHit, Taxonomy};
use crate::error::Result;
use crate::sparse::{BmParams, SparseIndex};
use crate::text;

/// Count contiguous whole-token occurrences of `needle` in `haystack`.
fn count_token_matches(haystack: &[String], needle: &[String]) -> usize {
    if needle.is_empty() || haystack.len() < needle.len() {
        return 0;
    }
    haystack.windows(needle.len()).filter(|w| *w == needle).count()
}

/// Label a chunk with case-insensitive whole-word keyword matches and the
/// domains they belong to. Hits are sorted by keyword, domains follow
/// taxonomy order, so the result is independent of keyword listing order.
pub fn classify_chunk(chunk: &DocumentChunk, tax: &Taxonomy) -> DocumentChunk {
    let tokens = text::tokenize(&chunk.text);
    let mut hits: Vec<KeywordHit> = Vec::new();
    let mut domains: Vec<String> = Vec::new();

    for domain in tax.domains() {
        let mut domain_hit = false;
        for keyword in tax.keywords(domain) {
            let needle = text::tokenize(keyword);
            let count = count_token_matches(&tokens, &needle);
            if count > 0 {
                hits.push(KeywordHit(keyword.clone(), count));
                domain_hit = true;
            }
        }
        if domain_hit {
            domains.push(domain.clone());
        }
    }
    hits.sort_by(|a, b| a.0.cmp(&b.0));

    DocumentChunk {
        domains,
        keyword_hits: hits,
        ..chunk.clone()
    }
}

/// Retain chunks whose best BM25 score against any per-domain keyword query
/// reaches `min_score`. Input order is preserved. A transient sparse index
/// is built over the candidate chunks themselves.
pub fn filter_by_taxonomy(
    chunks: &[DocumentChunk],
    tax: &Taxonomy,
    min_score: f64,
    params: BmParams,
) -> Result<Vec<DocumentChunk>> {
    if chunks.is_empty() {
        return Ok(Vec::new());
    }
    let index = SparseIndex::build(chunks, params)?;
    let queries: Vec<Vec<String>> = tax
        .domains()
        .iter()
        .map(|d| text::tokenize(&tax.keywords(d).join(" ")))
        .collect();

    #[cfg(feature = "parallel")]
    let iter = chunks.par_iter();
    #[cfg(not(feature = "parallel"))]
    let iter = chunks.iter();

    let retained: Vec<Option<DocumentChunk>> = iter
        .map(|chunk| {
            let best = queries
                .iter()
                .map(|q| index.bm25_score(q, &chunk.chunk_id).expect("indexed id"))
                .fold(f64::NEG_INFINITY, f64::max);
            if best >= min_score {
                Some(chunk.clone())
            } else {
                None
            }
        })
        .collect();

    Ok(retained.into_iter().flatten().collect())
}
