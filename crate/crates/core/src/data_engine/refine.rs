//! The four-agent refinement chain: rethink -> rewrite -> supervise ->
//! evaluate, each one templated backend call returning strict JSON.

use serde::{Deserialize, Serialize};

use crate::data_engine::{AgentKind, AgentRecord, QAInstruction, RawInstruction, Verdict, AGENT_ORDER};
use crate::error::Result;
use crate::llm::{ChatBackend, Message};
use crate::text;

pub const DEFAULT_RETHINK_TEMPLATE: &str = "[rethink] Revisit the QA pair below. Simulate \
alternative reasoning paths and semantic perspectives; close logical gaps and broaden coverage. \
Reply with strict JSON: {\"verdict\": \"pass\"|\"revise\"|\"reject\", \"revised_question\": \
string?, \"revised_answer\": string?, \"notes\": string}.\n\nQuestion: {question}\nAnswer: {answer}";

pub const DEFAULT_REWRITE_TEMPLATE: &str = "[rewrite] Normalize the QA pair below for stylistic \
coherence: paraphrase awkward phrasing, standardize format and tone, and enforce domain \
terminology. Reply with strict JSON: {\"verdict\": \"pass\"|\"revise\"|\"reject\", \
\"revised_question\": string?, \"revised_answer\": string?, \"notes\": string}.\n\nQuestion: \
{question}\nAnswer: {answer}";

pub const DEFAULT_SUPERVISE_TEMPLATE: &str = "[supervise] Validate the QA pair below: check \
question-answer alignment, factual correctness, and topical fit; reject hallucinated or \
off-topic content. Reply with strict JSON: {\"verdict\": \"pass\"|\"reject\", \"notes\": \
string}.\n\nQuestion: {question}\nAnswer: {answer}";

pub const DEFAULT_EVALUATE_TEMPLATE: &str = "[evaluate] Score the QA pair below. Reply with \
strict JSON: {\"verdict\": \"pass\"|\"reject\", \"notes\": string, \"scores\": {\"coherence\": \
0-1, \"informativeness\": 0-1, \"accuracy\": 0-1}}.\n\nQuestion: {question}\nAnswer: {answer}";

/// The four agent prompt templates (placeholders `{question}`, `{answer}`).
#[derive(Debug, Clone)]
pub struct AgentTemplates {
    pub rethink: String,
    pub rewrite: String,
    pub supervise: String,
    pub evaluate: String,
}

impl Default for AgentTemplates {
    fn default() -> Self {
        AgentTemplates {
            rethink: DEFAULT_RETHINK_TEMPLATE.into(),
            rewrite: DEFAULT_REWRITE_TEMPLATE.into(),
            supervise: DEFAULT_SUPERVISE_TEMPLATE.into(),
            evaluate: DEFAULT_EVALUATE_TEMPLATE.into(),
        }
    }
}

impl AgentTemplates {
    /// Load per-agent template files (`rethink.txt`, `rewrite.txt`,
    /// `supervise.txt`, `evaluate.txt`) from a directory, falling back to
    /// the built-in template when a file is absent.
    pub fn from_dir(dir: &std::path::Path) -> Result<Self> {
        let read = |name: &str, fallback: &str| -> Result<String> {
            let path = dir.join(name);
            if path.exists() {
                Ok(std::fs::read_to_string(&path)?)
            } else {
                Ok(fallback.to_string())
            }
        };
        Ok(AgentTemplates {
            rethink: read("rethink.txt", DEFAULT_RETHINK_TEMPLATE)?,
            rewrite: read("rewrite.txt", DEFAULT_REWRITE_TEMPLATE)?,
            supervise: read("supervise.txt", DEFAULT_SUPERVISE_TEMPLATE)?,
            evaluate: read("evaluate.txt", DEFAULT_EVALUATE_TEMPLATE)?,
        })
    }

    fn for_agent(&self, agent: AgentKind) -> &str {
        match agent {
            AgentKind::Rethink => &self.rethink,
            AgentKind::Rewrite => &self.rewrite,
            AgentKind::Supervise => &self.supervise,
            AgentKind::Evaluate => &self.evaluate,
        }
    }
}

/// Acceptance thresholds and rule gates for the evaluate stage.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineThresholds {
    pub accept_quality: f64,
    pub answer_min_tokens: usize,
    pub answer_max_tokens: usize,
}

impl Default for RefineThresholds {
    fn default() -> Self {
        RefineThresholds {
            accept_quality: 0.75,
            answer_min_tokens: 10,
            answer_max_tokens: 4096,
        }
    }
}

/// Strict JSON shape every agent must reply with.
#[derive(Debug, Deserialize)]
struct AgentReply {
    verdict: Verdict,
    #[serde(default)]
    revised_question: Option<String>,
    #[serde(default)]
    revised_answer: Option<String>,
    #[serde(default)]
    notes: String,
    #[serde(default)]
    scores: Option<AgentScores>,
}

#[derive(Debug, Deserialize)]
struct AgentScores {
    coherence: f64,
    informativeness: f64,
    accuracy: f64,
}

impl AgentScores {
    fn quality(&self) -> Option<f64> {
        let values = [self.coherence, self.informativeness, self.accuracy];
        if values.iter().all(|v| (0.0..=1.0).contains(v)) {
            Some(values.iter().sum::<f64>() / 3.0)
        } else {
            None
        }
    }
}

/// Outcome of refining one raw instruction.
#[derive(Debug)]
pub enum RefineOutcome {
    Accepted(QAInstruction),
    Rejected {
        stage: AgentKind,
        reason: String,
        audit: Vec<AgentRecord>,
    },
}

fn parse_agent_reply(reply: &str) -> std::result::Result<AgentReply, String> {
    let candidate = match (reply.find('{'), reply.rfind('}')) {
        (Some(s), Some(e)) if e > s => &reply[s..=e],
        _ => reply,
    };
    serde_json::from_str(candidate).map_err(|e| format!("unparseable agent reply: {e}"))
}

const IMPERATIVE_OPENERS: [&str; 20] = [
    "describe", "explain", "list", "compare", "define", "outline", "discuss", "identify",
    "summarize", "name", "state", "give", "recommend", "suggest", "classify", "rewrite",
    "extract", "design", "evaluate", "propose",
];

fn question_is_well_formed(question: &str) -> bool {
    if question.trim_end().ends_with('?') {
        return true;
    }
    text::tokenize(question)
        .first()
        .is_some_and(|first| IMPERATIVE_OPENERS.contains(&first.as_str()))
}

fn state_hash(question: &str, answer: &str) -> String {
    text::fnv1a64_hex(format!("{question}\u{1f}{answer}").as_bytes(), 0)
}

/// Run the four agents in pipeline order over one raw instruction.
///
/// Any agent verdict of `reject` (and any backend or parse failure) stops
/// the chain at that stage. The evaluate stage combines the model-driven
/// quality (mean of coherence/informativeness/accuracy) with rule gates:
/// non-empty answer, answer token length within bounds, and an
/// interrogative or imperative question. The full audit trail is recorded
/// either way.
pub fn refine(
    raw: &RawInstruction,
    backend: &dyn ChatBackend,
    templates: &AgentTemplates,
    thresholds: &RefineThresholds,
) -> Result<RefineOutcome> {
    raw.validate()?;

    let mut question = raw.question.clone();
    let mut answer = raw.answer.clone();
    let mut audit: Vec<AgentRecord> = Vec::new();
    let mut quality: Option<f64> = None;

    for agent in AGENT_ORDER {
        let template = templates.for_agent(agent);
        let template_hash = text::fnv1a64_hex(template.as_bytes(), 0);
        let prompt = template
            .replace("{question}", &question)
            .replace("{answer}", &answer);

        let reply = match backend.complete(&[Message::user(prompt)]) {
            Ok(reply) => reply,
            Err(e) => {
                let reason = format!("backend: {e}");
                audit.push(AgentRecord {
                    agent,
                    verdict: Verdict::Reject,
                    notes: reason.clone(),
                    output_hash: state_hash(&question, &answer),
                    template_hash,
                });
                return Ok(RefineOutcome::Rejected {
                    stage: agent,
                    reason,
                    audit,
                });
            }
        };

        let parsed = match parse_agent_reply(&reply) {
            Ok(parsed) => parsed,
            Err(reason) => {
                audit.push(AgentRecord {
                    agent,
                    verdict: Verdict::Reject,
                    notes: reason.clone(),
                    output_hash: state_hash(&question, &answer),
                    template_hash,
                });
                return Ok(RefineOutcome::Rejected {
                    stage: agent,
                    reason,
                    audit,
                });
            }
        };

        if let Some(q) = &parsed.revised_question {
            if !q.trim().is_empty() {
                question = q.clone();
            }
        }
        if let Some(a) = &parsed.revised_answer {
            answer = a.clone();
        }
        if agent == AgentKind::Evaluate {
            quality = parsed.scores.as_ref().and_then(AgentScores::quality);
        }

        audit.push(AgentRecord {
            agent,
            verdict: parsed.verdict,
            notes: parsed.notes.clone(),
            output_hash: state_hash(&question, &answer),
            template_hash,
        });

        if parsed.verdict == Verdict::Reject {
            return Ok(RefineOutcome::Rejected {
                stage: agent,
                reason: if parsed.notes.is_empty() {
                    "rejected by agent".into()
                } else {
                    parsed.notes
                },
                audit,
            });
        }
    }

    // Rule gates at the evaluate stage.
    let answer_tokens = text::token_count(&answer);
    let gate_failure = if answer.trim().is_empty() {
        Some("empty answer".to_string())
    } else if answer_tokens < thresholds.answer_min_tokens
        || answer_tokens > thresholds.answer_max_tokens
    {
        Some(format!(
            "answer length {answer_tokens} outside [{}, {}] tokens",
            thresholds.answer_min_tokens, thresholds.answer_max_tokens
        ))
    } else if !question_is_well_formed(&question) {
        Some("question is neither interrogative nor imperative".to_string())
    } else {
        None
    };
    if let Some(reason) = gate_failure {
        return Ok(RefineOutcome::Rejected {
            stage: AgentKind::Evaluate,
            reason,
            audit,
        });
    }

    let Some(quality) = quality else {
        return Ok(RefineOutcome::Rejected {
            stage: AgentKind::Evaluate,
            reason: "evaluate reply carried no valid scores".into(),
            audit,
        });
    };
    if quality < thresholds.accept_quality {
        return Ok(RefineOutcome::Rejected {
            stage: AgentKind::Evaluate,
            reason: format!(
                "quality {quality:.3} below threshold {}",
                thresholds.accept_quality
            ),
            audit,
        });
    }

    Ok(RefineOutcome::Accepted(QAInstruction {
        id: raw.id.clone(),
        question,
        answer,
        origin: raw.origin,
        source_refs: raw.source_refs.clone(),
        round: raw.round,
        quality,
        audit,
    }))
}
