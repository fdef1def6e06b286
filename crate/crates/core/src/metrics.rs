//! Automatic surface metrics: sentence BLEU, an exact-match METEOR variant,
//! and ROUGE-1/2/L. All scores are on a 0-100 scale and tokenized with the
//! shared tokenizer so they agree with the rest of the engine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{ngram_counts, tokenize};

/// Precision/recall/F1 triplet on the 0-100 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Triplet {
    fn zero() -> Self {
        Triplet {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        }
    }

    fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Triplet {
            precision,
            recall,
            f1,
        }
    }
}

/// All automatic metrics for one candidate/reference pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu: f64,
    pub meteor: f64,
    pub rouge1: Triplet,
    pub rouge2: Triplet,
    pub rouge_l: Triplet,
}

/// Compute the full report against a single reference.
pub fn report(candidate: &str, reference: &str) -> Result<MetricReport> {
    Ok(MetricReport {
        bleu: bleu(candidate, &[reference.to_string()], 4)?,
        meteor: meteor_like(candidate, reference),
        rouge1: rouge_n(candidate, reference, 1),
        rouge2: rouge_n(candidate, reference, 2),
        rouge_l: rouge_l(candidate, reference),
    })
}

/// Sentence BLEU with clipped n-gram precisions for n = 1..=max_n.
///
/// Zero counts for n >= 2 are smoothed add-1 (numerator and denominator);
/// a zero unigram precision keeps the score at exactly 0. The brevity
/// penalty `exp(1 - r/c)` applies when the candidate is shorter than the
/// closest reference (r ties resolve to the shorter reference).
pub fn bleu(candidate: &str, references: &[String], max_n: usize) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::EmptyReference);
    }
    let cand = tokenize(candidate);
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).collect();
    let c = cand.len();
    if c == 0 {
        return Ok(0.0);
    }

    // Closest reference length; ties prefer the shorter.
    let r = refs
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .unwrap_or(0);

    let mut log_precision_sum = 0.0;
    for n in 1..=max_n {
        let cand_counts = ngram_counts(&cand, n);
        let total: usize = cand_counts.values().sum();
        let mut matched = 0usize;
        for (gram, &count) in &cand_counts {
            let best_ref = refs
                .iter()
                .map(|r| ngram_counts(r, n).get(gram).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            matched += count.min(best_ref);
        }
        let p = if matched == 0 {
            if n == 1 {
                return Ok(0.0);
            }
            (matched + 1) as f64 / (total + 1) as f64
        } else {
            matched as f64 / total as f64
        };
        log_precision_sum += p.ln();
    }

    let brevity = if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    Ok(100.0 * brevity * (log_precision_sum / max_n as f64).exp())
}

/// Exact-unigram-match METEOR variant: greedy left-to-right one-to-one
/// alignment, F-mean `10PR / (R + 9P)`, and a fragmentation penalty
/// `0.5 * (chunks / matches)^3`.
pub fn meteor_like(candidate: &str, reference: &str) -> f64 {
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    if cand.is_empty() || refr.is_empty() {
        return 0.0;
    }

    let mut used = vec![false; refr.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (ci, token) in cand.iter().enumerate() {
        if let Some(ri) = (0..refr.len()).find(|&ri| !used[ri] && refr[ri] == *token) {
            used[ri] = true;
            pairs.push((ci, ri));
        }
    }
    let m = pairs.len();
    if m == 0 {
        return 0.0;
    }

    let precision = m as f64 / cand.len() as f64;
    let recall = m as f64 / refr.len() as f64;
    let fmean = 10.0 * precision * recall / (recall + 9.0 * precision);

    // Chunks: maximal runs contiguous in both candidate and reference.
    let mut chunks = 1usize;
    for pair in pairs.windows(2) {
        if pair[1].0 != pair[0].0 + 1 || pair[1].1 != pair[0].1 + 1 {
            chunks += 1;
        }
    }
    let penalty = 0.5 * (chunks as f64 / m as f64).powi(3);
    100.0 * fmean * (1.0 - penalty)
}

/// ROUGE-N: clipped n-gram overlap precision/recall/F1.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Triplet {
    let cand = ngram_counts(&tokenize(candidate), n);
    let refr = ngram_counts(&tokenize(reference), n);
    let cand_total: usize = cand.values().sum();
    let ref_total: usize = refr.values().sum();
    if cand_total == 0 || ref_total == 0 {
        return Triplet::zero();
    }
    let overlap: usize = cand
        .iter()
        .map(|(gram, &count)| count.min(refr.get(gram).copied().unwrap_or(0)))
        .sum();
    Triplet::from_pr(
        100.0 * overlap as f64 / cand_total as f64,
        100.0 * overlap as f64 / ref_total as f64,
    )
}

/// ROUGE-L: longest common subsequence precision/recall/F1.
pub fn rouge_l(candidate: &str, reference: &str) -> Triplet {
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    if cand.is_empty() || refr.is_empty() {
        return Triplet::zero();
    }
    let lcs = lcs_length(&cand, &refr);
    Triplet::from_pr(
        100.0 * lcs as f64 / cand.len() as f64,
        100.0 * lcs as f64 / refr.len() as f64,
    )
}

fn lcs_length(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut current = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            current[j + 1] = if ai == bj {
                prev[j] + 1
            } else {
                prev[j + 1].max(current[j])
            };
        }
        std::mem::swap(&mut prev, &mut current);
    }
    prev[b.len()]
}

/// Mean of per-item reports (used for corpus-level summaries).
pub fn mean_report(reports: &[MetricReport]) -> Option<MetricReport> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    let mean_triplet = |f: &dyn Fn(&MetricReport) -> Triplet| {
        let p = reports.iter().map(|r| f(r).precision).sum::<f64>() / n;
        let r_ = reports.iter().map(|r| f(r).recall).sum::<f64>() / n;
        let f1 = reports.iter().map(|r| f(r).f1).sum::<f64>() / n;
        Triplet {
            precision: p,
            recall: r_,
            f1,
        }
    };
    Some(MetricReport {
        bleu: reports.iter().map(|r| r.bleu).sum::<f64>() / n,
        meteor: reports.iter().map(|r| r.meteor).sum::<f64>() / n,
        rouge1: mean_triplet(&|r| r.rouge1),
        rouge2: mean_triplet(&|r| r.rouge2),
        rouge_l: mean_triplet(&|r| r.rouge_l),
    })
}

/// Batch scoring of candidate/reference pairs.
pub fn batch_reports(pairs: &[(String, String)]) -> Result<Vec<MetricReport>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        pairs.par_iter().map(|(c, r)| report(c, r)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        pairs.iter().map(|(c, r)| report(c, r)).collect()
    }
}
