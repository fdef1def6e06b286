//! Instruction data engine: three sourcing pipelines (distillation,
//! extraction, seed-loop generation), the four-agent refinement chain, and
//! the dedup/leakage/sampling filters around them.

mod filters;
mod pipelines;
mod refine;

pub use filters::{
    dedup, leakage_filter, promote_to_seeds, sample_mini, DedupItem, LeakageRemoval, RemovedPair,
};
pub use pipelines::{
    distill, extract, generate_from_seeds, parse_qa_blocks, ExtractRecord, GenerateOutcome,
    PipelineFailure, DEFAULT_DISTILL_TEMPLATE, DEFAULT_EXTRACT_TEMPLATE, DEFAULT_GENERATE_TEMPLATE,
};
pub use refine::{refine, AgentTemplates, RefineOutcome, RefineThresholds};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which pipeline produced an instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Distill,
    Extract,
    Generate,
}

/// An instruction candidate before refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawInstruction {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub origin: Origin,
    pub source_refs: Vec<String>,
    /// Generation-loop round; 0 for non-loop origins.
    pub round: usize,
}

impl RawInstruction {
    pub fn validate(&self) -> Result<()> {
        if self.question.trim().is_empty() {
            return Err(Error::InvalidInput(format!(
                "instruction {}: question is empty",
                self.id
            )));
        }
        if self.origin == Origin::Distill && self.source_refs.is_empty() {
            return Err(Error::InvalidInput(format!(
                "instruction {}: distilled instructions need at least one chunk ref",
                self.id
            )));
        }
        Ok(())
    }
}

/// The four refinement agents, in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Rethink,
    Rewrite,
    Supervise,
    Evaluate,
}

pub const AGENT_ORDER: [AgentKind; 4] = [
    AgentKind::Rethink,
    AgentKind::Rewrite,
    AgentKind::Supervise,
    AgentKind::Evaluate,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Revise,
    Reject,
}

/// One agent's audit entry: its verdict, notes, a hash of the instruction
/// state it produced, and the hash of the template it ran with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub agent: AgentKind,
    pub verdict: Verdict,
    pub notes: String,
    pub output_hash: String,
    pub template_hash: String,
}

/// A refined, accepted instruction with its full audit trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAInstruction {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub origin: Origin,
    pub source_refs: Vec<String>,
    pub round: usize,
    pub quality: f64,
    pub audit: Vec<AgentRecord>,
}

impl QAInstruction {
    /// Accepted instructions carry a non-empty answer and the four agents
    /// in pipeline order.
    pub fn validate(&self) -> Result<()> {
        if self.answer.trim().is_empty() {
            return Err(Error::InvalidInput(format!(
                "instruction {}: accepted answer is empty",
                self.id
            )));
        }
        if !(0.0..=1.0).contains(&self.quality) {
            return Err(Error::InvalidInput(format!(
                "instruction {}: quality {} outside [0, 1]",
                self.id, self.quality
            )));
        }
        let order: Vec<AgentKind> = self.audit.iter().map(|r| r.agent).collect();
        if order != AGENT_ORDER {
            return Err(Error::InvalidInput(format!(
                "instruction {}: audit order {order:?} is not the pipeline order",
                self.id
            )));
        }
        Ok(())
    }
}

/// One curated seed prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub quality: f64,
    pub human_verified: bool,
}

/// The seed pool backing the generation loop. Human-verified seeds are
/// permanent; promoted seeds fill the remaining capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedPool {
    pub capacity: usize,
    pub seeds: Vec<Seed>,
}

impl SeedPool {
    pub fn new(capacity: usize) -> Self {
        SeedPool {
            capacity,
            seeds: Vec::new(),
        }
    }

    pub fn human_count(&self) -> usize {
        self.seeds.iter().filter(|s| s.human_verified).count()
    }

    pub fn promoted_count(&self) -> usize {
        self.seeds.len() - self.human_count()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)?;
        Ok(())
    }
}
