//! Dedup, benchmark leakage filtering, seed promotion, and stratified
//! benchmark subsampling.

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::benchmark::{BenchmarkTask, TaskType};
use crate::data_engine::{QAInstruction, Seed, SeedPool};
use crate::error::{Error, Result};
use crate::text;

/// An item entering near-duplicate removal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupItem {
    pub id: String,
    pub text: String,
}

/// Record of one removal: which kept item displaced which duplicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovedPair {
    pub kept_id: String,
    pub removed_id: String,
    pub similarity: f64,
}

fn trigram_set(textv: &str) -> std::collections::HashSet<String> {
    text::ngram_set(&text::tokenize(textv), 3)
}

/// Remove near-duplicates: when two items reach the token-3-gram Jaccard
/// threshold (or are exact text duplicates), the later item by input order
/// is removed.
pub fn dedup(items: &[DedupItem], threshold: f64) -> Result<(Vec<DedupItem>, Vec<RemovedPair>)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "dedup threshold must be in (0, 1], got {threshold}"
        )));
    }
    let grams: Vec<std::collections::HashSet<String>> =
        items.iter().map(|i| trigram_set(&i.text)).collect();

    let mut kept: Vec<usize> = Vec::new();
    let mut removed: Vec<RemovedPair> = Vec::new();
    'outer: for (j, item) in items.iter().enumerate() {
        for &i in &kept {
            let exact = items[i].text == item.text;
            let similarity = if exact {
                1.0
            } else {
                text::jaccard(&grams[i], &grams[j])
            };
            if exact || similarity >= threshold {
                removed.push(RemovedPair {
                    kept_id: items[i].id.clone(),
                    removed_id: item.id.clone(),
                    similarity,
                });
                continue 'outer;
            }
        }
        kept.push(j);
    }
    Ok((
        kept.into_iter().map(|i| items[i].clone()).collect(),
        removed,
    ))
}

/// Record of one leakage removal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeakageRemoval {
    pub task_id: String,
    pub train_id: String,
    pub similarity: f64,
}

/// Drop benchmark tasks whose question is too similar (token-3-gram
/// Jaccard, or verbatim) to any training question.
pub fn leakage_filter(
    bench: &[BenchmarkTask],
    train: &[QAInstruction],
    threshold: f64,
) -> Result<(Vec<BenchmarkTask>, Vec<LeakageRemoval>)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "leakage threshold must be in (0, 1], got {threshold}"
        )));
    }
    let train_grams: Vec<std::collections::HashSet<String>> =
        train.iter().map(|t| trigram_set(&t.question)).collect();

    let mut kept = Vec::new();
    let mut removed = Vec::new();
    'tasks: for task in bench {
        let grams = trigram_set(&task.question);
        for (i, instruction) in train.iter().enumerate() {
            let exact = instruction.question == task.question;
            let similarity = if exact {
                1.0
            } else {
                text::jaccard(&grams, &train_grams[i])
            };
            if exact || similarity >= threshold {
                removed.push(LeakageRemoval {
                    task_id: task.id.clone(),
                    train_id: instruction.id.clone(),
                    similarity,
                });
                continue 'tasks;
            }
        }
        kept.push(task.clone());
    }
    Ok((kept, removed))
}

/// Promote the top-quality fraction of accepted instructions into the seed
/// pool. Human-verified seeds are never evicted; when capacity binds, the
/// lowest-quality promoted seeds go first.
pub fn promote_to_seeds(
    pool: &SeedPool,
    accepted: &[QAInstruction],
    fraction: f64,
) -> Result<SeedPool> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidInput(format!(
            "promotion fraction must be in [0, 1], got {fraction}"
        )));
    }
    let take = (fraction * accepted.len() as f64).ceil() as usize;
    let mut ranked: Vec<&QAInstruction> = accepted.iter().collect();
    ranked.sort_by(|a, b| {
        b.quality
            .partial_cmp(&a.quality)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.id.cmp(&b.id))
    });

    let mut next = pool.clone();
    for qa in ranked.into_iter().take(take) {
        next.seeds.push(Seed {
            id: qa.id.clone(),
            question: qa.question.clone(),
            answer: qa.answer.clone(),
            quality: qa.quality,
            human_verified: false,
        });
    }

    let allowed_promoted = next.capacity.saturating_sub(next.human_count());
    while next.promoted_count() > allowed_promoted {
        let evict = next
            .seeds
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.human_verified)
            .min_by(|(_, a), (_, b)| {
                a.quality
                    .partial_cmp(&b.quality)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| b.id.cmp(&a.id))
            })
            .map(|(i, _)| i)
            .expect("promoted seeds exist");
        next.seeds.remove(evict);
    }
    Ok(next)
}

/// Largest-remainder allocation of `n` over strata sizes. Remainder ties
/// break toward the larger stratum, then the smaller index.
fn largest_remainder(counts: &[usize], n: usize) -> Vec<usize> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return vec![0; counts.len()];
    }
    let mut alloc: Vec<usize> = counts.iter().map(|&c| n * c / total).collect();
    let assigned: usize = alloc.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let rem_a = n * counts[a] % total;
        let rem_b = n * counts[b] % total;
        rem_b
            .cmp(&rem_a)
            .then_with(|| counts[b].cmp(&counts[a]))
            .then_with(|| a.cmp(&b))
    });
    for &i in order.iter().take(n - assigned) {
        alloc[i] += 1;
    }
    alloc
}

/// Stratified benchmark subsample: per-task-type quotas by largest-remainder
/// allocation, uniform within each stratum, deterministic under the seed.
/// The result is canonically ordered by task id.
pub fn sample_mini(bench: &[BenchmarkTask], n: usize, seed: u64) -> Result<Vec<BenchmarkTask>> {
    if n > bench.len() {
        return Err(Error::InsufficientTasks {
            requested: n,
            available: bench.len(),
        });
    }

    // Strata in canonical task-type order.
    let mut strata: Vec<(TaskType, Vec<&BenchmarkTask>)> = TaskType::ALL
        .iter()
        .map(|&tt| {
            let mut tasks: Vec<&BenchmarkTask> =
                bench.iter().filter(|t| t.task_type == tt).collect();
            tasks.sort_by(|a, b| a.id.cmp(&b.id));
            (tt, tasks)
        })
        .filter(|(_, tasks)| !tasks.is_empty())
        .collect();

    let counts: Vec<usize> = strata.iter().map(|(_, t)| t.len()).collect();
    let quotas = largest_remainder(&counts, n);

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut selected: Vec<BenchmarkTask> = Vec::with_capacity(n);
    for ((_, tasks), quota) in strata.iter_mut().zip(quotas) {
        tasks.shuffle(&mut rng);
        selected.extend(tasks.iter().take(quota).map(|t| (*t).clone()));
    }
    selected.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(selected)
}
