//! Token-window chunking with sentence-boundary snapping.

use serde::{Deserialize, Serialize};

use crate::corpus::{CleanDocument, DocumentChunk};
use crate::error::{Error, Result};
use crate::text::{token_spans, TokenSpan};

/// Chunking parameters. Token positions use the shared tokenizer, so chunk
/// token counts agree with the sparse index and prompt budgets.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkConfig {
    pub max_chunk_tokens: usize,
    pub overlap_tokens: usize,
    /// How far back from the window end to search for a sentence boundary.
    pub sentence_slack_tokens: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        ChunkConfig {
            max_chunk_tokens: 512,
            overlap_tokens: 64,
            sentence_slack_tokens: 32,
        }
    }
}

impl ChunkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_chunk_tokens < 32 {
            return Err(Error::Config(format!(
                "max_chunk_tokens must be >= 32, got {}",
                self.max_chunk_tokens
            )));
        }
        if self.overlap_tokens >= self.max_chunk_tokens {
            return Err(Error::Config(format!(
                "overlap_tokens {} must be < max_chunk_tokens {}",
                self.overlap_tokens, self.max_chunk_tokens
            )));
        }
        Ok(())
    }
}

/// True when the separator bytes after token `i` contain sentence-ending
/// punctuation, i.e. a chunk may end after token `i` without splitting a
/// sentence.
fn sentence_cut_after(text: &str, spans: &[TokenSpan], i: usize) -> bool {
    let sep_start = spans[i].end;
    let sep_end = spans.get(i + 1).map_or(text.len(), |s| s.start);
    text[sep_start..sep_end]
        .chars()
        .any(|c| matches!(c, '.' | '!' | '?'))
}

/// Split a cleaned document into token-window chunks.
///
/// Sections chunk independently. Windows hold at most `max_chunk_tokens`
/// tokens; a cut snaps back to the nearest sentence boundary within
/// `sentence_slack_tokens` (never forward — the token bound is hard); the
/// next window starts `overlap_tokens` before the cut. With zero overlap the
/// chunk texts concatenate back to the section text byte-for-byte.
pub fn chunk_document(doc: &CleanDocument, cfg: &ChunkConfig) -> Result<Vec<DocumentChunk>> {
    cfg.validate()?;
    let mut chunks = Vec::new();
    let mut ordinal = 0usize;

    for section in &doc.sections {
        let text = section.text.as_str();
        let spans = token_spans(text);
        let n = spans.len();
        if n == 0 {
            continue;
        }

        let mut start = 0usize;
        loop {
            let window_end = (start + cfg.max_chunk_tokens).min(n);
            let mut cut = window_end;
            if window_end < n && cfg.sentence_slack_tokens > 0 {
                let lo = (start + 1).max(window_end.saturating_sub(cfg.sentence_slack_tokens));
                for p in (lo..=window_end).rev() {
                    if sentence_cut_after(text, &spans, p - 1) {
                        cut = p;
                        break;
                    }
                }
            }

            let byte_start = if start == 0 { 0 } else { spans[start].start };
            let byte_end = if cut == n { text.len() } else { spans[cut].start };
            let chunk_text = &text[byte_start..byte_end];

            chunks.push(DocumentChunk {
                chunk_id: format!("{}:{:04}", doc.id, ordinal),
                doc_id: doc.id.clone(),
                text: chunk_text.to_string(),
                token_count: cut - start,
                domains: Vec::new(),
                keyword_hits: Vec::new(),
            });
            ordinal += 1;

            if cut == n {
                break;
            }
            start = (cut.saturating_sub(cfg.overlap_tokens)).max(start + 1);
        }
    }
    Ok(chunks)
}
