//! The three instruction-sourcing pipelines.

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::DocumentChunk;
use crate::data_engine::{Origin, RawInstruction, SeedPool};
use crate::error::{Error, Result};
use crate::llm::{ChatBackend, Message};

pub const DEFAULT_DISTILL_TEMPLATE: &str = "Distill the passage below into grounded \
question-answer pairs. Use exactly this block format, one pair after another:\n\
Q: <question>\nA: <answer>\n\nPassage ({chunk_id}):\n{text}";

pub const DEFAULT_EXTRACT_TEMPLATE: &str = "Rewrite the answer to the question below so it is \
complete, well-formed, and consistent with agricultural terminology. Reply with the answer text \
only.\n\nQuestion: {question}\nDraft answer: {answer}";

pub const DEFAULT_GENERATE_TEMPLATE: &str = "Write one new question-answer pair: a rephrased, \
extended, or related variant of the seed below. Use exactly this format:\n\
Q: <question>\nA: <answer>\n\nSeed question: {question}\nSeed answer: {answer}";

/// A pipeline step that failed for one source item.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineFailure {
    pub source_id: String,
    pub error: String,
}

/// Parse `Q: ... / A: ...` blocks from a model reply. Lines before the first
/// `Q:` are ignored; continuation lines attach to the open field; pairs with
/// an empty question or answer are dropped.
pub fn parse_qa_blocks(reply: &str) -> Vec<(String, String)> {
    enum State {
        Idle,
        Question,
        Answer,
    }
    let mut pairs = Vec::new();
    let mut question = String::new();
    let mut answer = String::new();
    let mut state = State::Idle;

    let mut flush = |question: &mut String, answer: &mut String| {
        let q = question.trim().to_string();
        let a = answer.trim().to_string();
        if !q.is_empty() && !a.is_empty() {
            pairs.push((q, a));
        }
        question.clear();
        answer.clear();
    };

    for line in reply.lines() {
        if let Some(rest) = line.strip_prefix("Q:") {
            flush(&mut question, &mut answer);
            question = rest.trim().to_string();
            state = State::Question;
        } else if let Some(rest) = line.strip_prefix("A:") {
            answer = rest.trim().to_string();
            state = State::Answer;
        } else {
            match state {
                State::Idle => {}
                State::Question => {
                    if !line.trim().is_empty() {
                        if !question.is_empty() {
                            question.push(' ');
                        }
                        question.push_str(line.trim());
                    }
                }
                State::Answer => {
                    if !line.trim().is_empty() {
                        if !answer.is_empty() {
                            answer.push('\n');
                        }
                        answer.push_str(line.trim());
                    }
                }
            }
        }
    }
    flush(&mut question, &mut answer);
    pairs
}

/// Distillation: turn taxonomy-filtered chunks into QA pairs. Each pair
/// carries its source chunk id; per-chunk backend failures are recorded and
/// the run continues.
pub fn distill(
    chunks: &[DocumentChunk],
    backend: &dyn ChatBackend,
    template: &str,
) -> (Vec<RawInstruction>, Vec<PipelineFailure>) {
    let mut out = Vec::new();
    let mut failures = Vec::new();
    for chunk in chunks {
        let prompt = template
            .replace("{chunk_id}", &chunk.chunk_id)
            .replace("{text}", &chunk.text);
        match backend.complete(&[Message::user(prompt)]) {
            Ok(reply) => {
                for (k, (question, answer)) in parse_qa_blocks(&reply).into_iter().enumerate() {
                    out.push(RawInstruction {
                        id: format!("distill:{}:{k}", chunk.chunk_id),
                        question,
                        answer,
                        origin: Origin::Distill,
                        source_refs: vec![chunk.chunk_id.clone()],
                        round: 0,
                    });
                }
            }
            Err(e) => failures.push(PipelineFailure {
                source_id: chunk.chunk_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    (out, failures)
}

/// A public-QA record to reformat.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractRecord {
    #[serde(default)]
    pub id: Option<String>,
    pub question: String,
    #[serde(default)]
    pub partial_answer: Option<String>,
}

/// Extraction: regenerate/normalize answers for existing questions. The
/// question is preserved verbatim; the backend reply becomes the answer.
pub fn extract(
    records: &[ExtractRecord],
    backend: &dyn ChatBackend,
    template: &str,
) -> (Vec<RawInstruction>, Vec<PipelineFailure>) {
    let mut out = Vec::new();
    let mut failures = Vec::new();
    for (i, record) in records.iter().enumerate() {
        let id = record
            .id
            .clone()
            .unwrap_or_else(|| format!("extract:{i:04}"));
        if record.question.trim().is_empty() {
            failures.push(PipelineFailure {
                source_id: id,
                error: "question is empty".into(),
            });
            continue;
        }
        let prompt = template
            .replace("{question}", &record.question)
            .replace("{answer}", record.partial_answer.as_deref().unwrap_or(""));
        match backend.complete(&[Message::user(prompt)]) {
            Ok(reply) => out.push(RawInstruction {
                id: id.clone(),
                question: record.question.clone(),
                answer: reply.trim().to_string(),
                origin: Origin::Extract,
                source_refs: record.id.iter().cloned().collect(),
                round: 0,
            }),
            Err(e) => failures.push(PipelineFailure {
                source_id: id,
                error: e.to_string(),
            }),
        }
    }
    (out, failures)
}

/// Result of the generation loop.
#[derive(Debug)]
pub struct GenerateOutcome {
    pub items: Vec<RawInstruction>,
    /// Set when a round produced nothing and aborted the loop.
    pub aborted_round: Option<usize>,
    pub failures: Vec<PipelineFailure>,
}

/// Generation: multi-round seed expansion. Each round draws `per_round`
/// seeds (uniformly, seeded RNG) and asks the backend for one variant pair
/// per draw. A round in which every call fails aborts the loop, returning
/// the partial results flagged with the aborted round.
pub fn generate_from_seeds(
    pool: &SeedPool,
    rounds: usize,
    per_round: usize,
    backend: &dyn ChatBackend,
    template: &str,
    rng_seed: u64,
) -> Result<GenerateOutcome> {
    if rounds == 0 {
        return Err(Error::InvalidInput("rounds must be >= 1".into()));
    }
    if pool.seeds.is_empty() {
        return Err(Error::EmptyInput("seed pool is empty".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let mut items = Vec::new();
    let mut failures = Vec::new();

    for round in 1..=rounds {
        let mut round_successes = 0usize;
        for j in 0..per_round {
            let seed = &pool.seeds[rng.gen_range(0..pool.seeds.len())];
            let id = format!("generate:r{round}:{j:04}");
            let prompt = template
                .replace("{question}", &seed.question)
                .replace("{answer}", &seed.answer);
            match backend.complete(&[Message::user(prompt)]) {
                Ok(reply) => match parse_qa_blocks(&reply).into_iter().next() {
                    Some((question, answer)) => {
                        items.push(RawInstruction {
                            id,
                            question,
                            answer,
                            origin: Origin::Generate,
                            source_refs: vec![seed.id.clone()],
                            round,
                        });
                        round_successes += 1;
                    }
                    None => failures.push(PipelineFailure {
                        source_id: id,
                        error: "reply contained no Q/A block".into(),
                    }),
                },
                Err(e) => failures.push(PipelineFailure {
                    source_id: id,
                    error: e.to_string(),
                }),
            }
        }
        if round_successes == 0 && per_round > 0 {
            return Ok(GenerateOutcome {
                items,
                aborted_round: Some(round),
                failures,
            });
        }
    }
    Ok(GenerateOutcome {
        items,
        aborted_round: None,
        failures,
    })
}
