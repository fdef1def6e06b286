//! `trellis forge` — run the instruction data engine: sourcing pipelines,
//! near-duplicate removal, and the four-agent refinement chain.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use trellis_core::config::{EngineConfig, LlmRole};
use trellis_core::corpus::DocumentChunk;
use trellis_core::data_engine::{
    dedup, distill, extract, generate_from_seeds, refine, AgentRecord, AgentTemplates, DedupItem,
    ExtractRecord, RawInstruction, RefineOutcome, RefineThresholds, SeedPool,
    DEFAULT_DISTILL_TEMPLATE, DEFAULT_EXTRACT_TEMPLATE, DEFAULT_GENERATE_TEMPLATE,
};
use trellis_core::error::{Error, Result};
use trellis_core::jsonl;
use trellis_core::llm::Limiter;

#[derive(Debug, Clone, Copy, Default)]
pub struct ForgeInputs<'a> {
    pub chunks: Option<&'a Path>,
    pub seeds: Option<&'a Path>,
    pub extract: Option<&'a Path>,
    pub rounds: Option<usize>,
    pub per_round: Option<usize>,
}

#[derive(Serialize)]
struct RejectionRow {
    id: String,
    stage: String,
    reason: String,
    audit: Vec<AgentRecord>,
}

fn pipeline_template(config: &EngineConfig, name: &str, fallback: &str) -> Result<String> {
    if let Some(dir) = &config.paths.templates {
        let path = dir.join(name);
        if path.exists() {
            return Ok(std::fs::read_to_string(&path)?);
        }
    }
    Ok(fallback.to_string())
}

pub fn forge(config: &EngineConfig, inputs: ForgeInputs<'_>, out_dir: &Path) -> Result<()> {
    if inputs.chunks.is_none() && inputs.seeds.is_none() && inputs.extract.is_none() {
        return Err(Error::InvalidInput(
            "forge needs at least one source: --chunks, --seeds, or --extract".into(),
        ));
    }
    std::fs::create_dir_all(out_dir)?;

    let limiter = Limiter::new(config.engine.max_inflight_llm);
    let backend = config.build_backend(LlmRole::Agent, Arc::clone(&limiter))?;
    let templates = match &config.paths.templates {
        Some(dir) => AgentTemplates::from_dir(dir)?,
        None => AgentTemplates::default(),
    };
    let thresholds = RefineThresholds {
        accept_quality: config.data_engine.accept_quality,
        answer_min_tokens: config.data_engine.answer_min_tokens,
        answer_max_tokens: config.data_engine.answer_max_tokens,
    };

    let mut raw: Vec<RawInstruction> = Vec::new();
    let mut source_failures = 0usize;

    if let Some(path) = inputs.chunks {
        let chunks: Vec<DocumentChunk> = jsonl::read_jsonl(path)?;
        let template = pipeline_template(config, "distill.txt", DEFAULT_DISTILL_TEMPLATE)?;
        let (items, failures) = distill(&chunks, backend.as_ref(), &template);
        for failure in &failures {
            eprintln!("distill {}: {}", failure.source_id, failure.error);
        }
        source_failures += failures.len();
        println!("distill: {} instructions from {} chunks", items.len(), chunks.len());
        raw.extend(items);
    }

    if let Some(path) = inputs.extract {
        let records: Vec<ExtractRecord> = jsonl::read_jsonl(path)?;
        let template = pipeline_template(config, "extract.txt", DEFAULT_EXTRACT_TEMPLATE)?;
        let (items, failures) = extract(&records, backend.as_ref(), &template);
        for failure in &failures {
            eprintln!("extract {}: {}", failure.source_id, failure.error);
        }
        source_failures += failures.len();
        println!("extract: {} instructions from {} records", items.len(), records.len());
        raw.extend(items);
    }

    let mut pool: Option<SeedPool> = None;
    if let Some(path) = inputs.seeds {
        let loaded = SeedPool::load(path)?;
        let rounds = inputs.rounds.unwrap_or(config.data_engine.generate_rounds);
        let per_round = inputs
            .per_round
            .unwrap_or(config.data_engine.generate_per_round);
        let template = pipeline_template(config, "generate.txt", DEFAULT_GENERATE_TEMPLATE)?;
        let outcome = generate_from_seeds(
            &loaded,
            rounds,
            per_round,
            backend.as_ref(),
            &template,
            config.seed,
        )?;
        for failure in &outcome.failures {
            eprintln!("generate {}: {}", failure.source_id, failure.error);
        }
        source_failures += outcome.failures.len();
        if let Some(round) = outcome.aborted_round {
            eprintln!("generation aborted in round {round}; keeping partial results");
        }
        println!(
            "generate: {} instructions over {} round(s)",
            outcome.items.len(),
            rounds
        );
        raw.extend(outcome.items);
        pool = Some(loaded);
    }

    if raw.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no raw instructions produced ({source_failures} source failures)"
        )));
    }

    // Near-duplicate removal over question + answer text.
    let items: Vec<DedupItem> = raw
        .iter()
        .map(|r| DedupItem {
            id: r.id.clone(),
            text: format!("{}\n{}", r.question, r.answer),
        })
        .collect();
    let (kept_items, removed_pairs) = dedup(&items, config.data_engine.dedup_threshold)?;
    let kept_ids: std::collections::HashSet<&str> =
        kept_items.iter().map(|i| i.id.as_str()).collect();
    jsonl::write_jsonl(&out_dir.join("dedup_removed.jsonl"), &removed_pairs)?;

    let mut accepted = Vec::new();
    let mut rejected: Vec<RejectionRow> = Vec::new();
    for instruction in raw.iter().filter(|r| kept_ids.contains(r.id.as_str())) {
        match refine(instruction, backend.as_ref(), &templates, &thresholds)? {
            RefineOutcome::Accepted(qa) => accepted.push(qa),
            RefineOutcome::Rejected { stage, reason, audit } => rejected.push(RejectionRow {
                id: instruction.id.clone(),
                stage: serde_json::to_value(stage)?
                    .as_str()
                    .unwrap_or_default()
                    .to_string(),
                reason,
                audit,
            }),
        }
    }

    jsonl::write_jsonl(&out_dir.join("accepted.jsonl"), &accepted)?;
    jsonl::write_jsonl(&out_dir.join("rejected.jsonl"), &rejected)?;

    if let Some(pool) = pool {
        let promoted = trellis_core::data_engine::promote_to_seeds(
            &pool,
            &accepted,
            config.data_engine.promote_fraction,
        )?;
        promoted.save(&out_dir.join("seeds.json"))?;
        println!(
            "seed pool: {} human + {} promoted (capacity {})",
            promoted.human_count(),
            promoted.promoted_count(),
            promoted.capacity
        );
    }

    println!(
        "forge: {} raw, {} removed as duplicates, {} accepted, {} rejected -> {}",
        raw.len(),
        removed_pairs.len(),
        accepted.len(),
        rejected.len(),
        out_dir.display()
    );
    Ok(())
}
