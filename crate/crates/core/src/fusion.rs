//! Channel fusion: merge the three channels' hits, deduplicate near-identical
//! evidence, and select a diverse top set by greedy MMR.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{Channel, ScoredHit};
use crate::text;

/// Fusion parameters: per-channel weights (must sum to 1), the MMR
/// relevance/diversity trade-off, the output size, and the near-duplicate
/// collapse threshold.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionConfig {
    pub w_dense: f64,
    pub w_sparse: f64,
    pub w_graph: f64,
    pub lambda: f64,
    pub top_n: usize,
    pub dedup_jaccard: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            w_dense: 1.0 / 3.0,
            w_sparse: 1.0 / 3.0,
            w_graph: 1.0 / 3.0,
            lambda: 0.7,
            top_n: 8,
            dedup_jaccard: 0.9,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [self.w_dense, self.w_sparse, self.w_graph];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("fusion weights must be >= 0".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "fusion weights must sum to 1, got {sum}"
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!(
                "lambda must be in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.top_n == 0 {
            return Err(Error::Config("top_n must be >= 1".into()));
        }
        if !(self.dedup_jaccard > 0.0 && self.dedup_jaccard <= 1.0) {
            return Err(Error::Config(format!(
                "dedup_jaccard must be in (0, 1], got {}",
                self.dedup_jaccard
            )));
        }
        Ok(())
    }

    fn weight(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Dense => self.w_dense,
            Channel::Sparse => self.w_sparse,
            Channel::Graph => self.w_graph,
        }
    }
}

/// What kind of evidence a fused item is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    Passage,
    TriplePath,
}

/// A fused, re-ranked evidence item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEvidence {
    pub kind: EvidenceKind,
    pub id: String,
    pub text: String,
    /// Normalized per-channel scores in [0, 1]; absent channels omitted.
    pub channel_scores: BTreeMap<Channel, f64>,
    pub composite: f64,
    pub rank: usize,
}

/// Min-max normalize scores to [0, 1] within one channel's hit list.
/// Single-element and constant lists map to 1.0.
pub fn normalize_channel(mut hits: Vec<ScoredHit>) -> Vec<ScoredHit> {
    if hits.is_empty() {
        return hits;
    }
    let min = hits.iter().map(|h| h.score).fold(f64::INFINITY, f64::min);
    let max = hits.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
    for h in &mut hits {
        h.score = if max > min { (h.score - min) / (max - min) } else { 1.0 };
    }
    hits
}

struct Candidate {
    kind: EvidenceKind,
    id: String,
    text: String,
    tokens: HashSet<String>,
    channel_scores: BTreeMap<Channel, f64>,
    composite: f64,
}

/// Fuse three channels of normalized hits into a ranked evidence list.
///
/// Candidates are merged by id; the composite is the weighted sum of the
/// normalized channel scores (a missing channel contributes 0). Items whose
/// token-3-gram Jaccard reaches `dedup_jaccard` collapse to the higher
/// composite. Greedy MMR then picks `top_n`: the first pick is the best
/// composite, each next pick maximizes
/// `lambda * composite - (1 - lambda) * max_similarity_to_selected`
/// with token-Jaccard similarity. All ties break by ascending id.
pub fn fuse(
    dense: &[ScoredHit],
    sparse: &[ScoredHit],
    graph: &[ScoredHit],
    cfg: &FusionConfig,
    text_of: &dyn Fn(&str) -> Option<String>,
) -> Result<Vec<RankedEvidence>> {
    cfg.validate()?;

    let mut merged: BTreeMap<String, (EvidenceKind, BTreeMap<Channel, f64>)> = BTreeMap::new();
    for hit in dense.iter().chain(sparse).chain(graph) {
        let kind = match hit.channel {
            Channel::Graph => EvidenceKind::TriplePath,
            _ => EvidenceKind::Passage,
        };
        let entry = merged
            .entry(hit.id.clone())
            .or_insert_with(|| (kind, BTreeMap::new()));
        entry.1.insert(hit.channel, hit.score);
    }

    let mut candidates: Vec<Candidate> = merged
        .into_iter()
        .map(|(id, (kind, channel_scores))| {
            let composite = channel_scores
                .iter()
                .map(|(c, s)| cfg.weight(*c) * s)
                .sum();
            let text = text_of(&id).unwrap_or_default();
            let tokens: HashSet<String> = text::tokenize(&text).into_iter().collect();
            Candidate {
                kind,
                id,
                text,
                tokens,
                channel_scores,
                composite,
            }
        })
        .collect();

    // Near-duplicate collapse, best composite first.
    candidates.sort_by(|a, b| {
        b.composite
            .partial_cmp(&a.composite)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.id.cmp(&b.id))
    });
    let mut kept: Vec<Candidate> = Vec::new();
    for cand in candidates {
        let duplicate = kept.iter().any(|k| {
            (!cand.text.is_empty() && cand.text == k.text)
                || text::ngram_jaccard(&cand.text, &k.text, 3) >= cfg.dedup_jaccard
        });
        if !duplicate {
            kept.push(cand);
        }
    }

    // Greedy MMR selection.
    let mut selected: Vec<Candidate> = Vec::new();
    while selected.len() < cfg.top_n && !kept.is_empty() {
        let mut best: Option<(usize, f64)> = None;
        for (i, cand) in kept.iter().enumerate() {
            let objective = if selected.is_empty() {
                cand.composite
            } else {
                let max_sim = selected
                    .iter()
                    .map(|s| text::jaccard(&cand.tokens, &s.tokens))
                    .fold(f64::NEG_INFINITY, f64::max);
                cfg.lambda * cand.composite - (1.0 - cfg.lambda) * max_sim
            };
            let better = match best {
                None => true,
                // `kept` is ordered by (composite desc, id asc), so a strict
                // improvement is required and ties keep the earlier (lower
                // id at equal composite) candidate.
                Some((bi, bo)) => {
                    objective > bo || (objective == bo && cand.id < kept[bi].id)
                }
            };
            if better {
                best = Some((i, objective));
            }
        }
        let (idx, _) = best.expect("kept is non-empty");
        selected.push(kept.remove(idx));
    }

    Ok(selected
        .into_iter()
        .enumerate()
        .map(|(i, c)| RankedEvidence {
            kind: c.kind,
            id: c.id,
            text: c.text,
            channel_scores: c.channel_scores,
            composite: c.composite,
            rank: i + 1,
        })
        .collect())
}

/// Fraction of `relevant_ids` present in the top-n selected items.
pub fn recall_at(
    selected: &[RankedEvidence],
    relevant_ids: &HashSet<String>,
    n: usize,
) -> Result<f64> {
    if relevant_ids.is_empty() {
        return Err(Error::EmptyRelevantSet);
    }
    let found = selected
        .iter()
        .take(n)
        .filter(|e| relevant_ids.contains(&e.id))
        .count();
    Ok(found as f64 / relevant_ids.len() as f64)
}
