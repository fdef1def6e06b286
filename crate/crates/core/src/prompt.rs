//! Augmented-prompt assembly under a token budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{EvidenceKind, RankedEvidence};
use crate::llm::Message;
use crate::text::token_count;

/// A generation template. The user pattern must contain each of `{query}`,
/// `{passages}`, and `{triples}` exactly once; rendering is pure
/// substitution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: String,
    pub system: String,
    pub user_pattern: String,
}

pub const DEFAULT_SYSTEM: &str = "You are an agricultural assistant. Ground your answer in the \
evidence provided and cite items by their bracketed numbers.";

pub const DEFAULT_USER_PATTERN: &str = "Question: {query}\n\nPassages:\n{passages}\n\nFacts:\n{triples}\n\nAnswer the question using the evidence above.";

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            name: "generator".into(),
            system: DEFAULT_SYSTEM.into(),
            user_pattern: DEFAULT_USER_PATTERN.into(),
        }
    }
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<()> {
        for placeholder in ["{query}", "{passages}", "{triples}"] {
            let count = self.user_pattern.matches(placeholder).count();
            if count != 1 {
                return Err(Error::Config(format!(
                    "template {}: placeholder {placeholder} must appear exactly once, found {count}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    fn render(&self, query: &str, passages: &str, triples: &str) -> String {
        self.user_pattern
            .replace("{query}", query)
            .replace("{passages}", passages)
            .replace("{triples}", triples)
    }
}

fn render_sections(evidence: &[(usize, &RankedEvidence)]) -> (String, String) {
    let mut passages = String::new();
    let mut triples = String::new();
    for (number, item) in evidence {
        let target = match item.kind {
            EvidenceKind::Passage => &mut passages,
            EvidenceKind::TriplePath => &mut triples,
        };
        if !target.is_empty() {
            target.push('\n');
        }
        target.push_str(&format!("[{number}] ({}) {}", item.id, item.text));
    }
    (passages, triples)
}

/// Assemble the chat messages for a query. Evidence items go in rank order,
/// numbered `[1]..[n]` across both sections; the list is cut at the last
/// whole item that keeps the rendered prompt within `budget_tokens` (counted
/// with the shared tokenizer). The query is always included verbatim.
pub fn build_prompt(
    query: &str,
    evidence: &[RankedEvidence],
    template: &PromptTemplate,
    budget_tokens: usize,
) -> Result<Vec<Message>> {
    template.validate()?;

    let cost = |included: &[(usize, &RankedEvidence)]| {
        let (passages, triples) = render_sections(included);
        let user = template.render(query, &passages, &triples);
        token_count(&template.system) + token_count(&user)
    };

    let baseline = cost(&[]);
    if baseline > budget_tokens {
        return Err(Error::BudgetTooSmall {
            budget: budget_tokens,
            needed: baseline,
        });
    }

    let mut included: Vec<(usize, &RankedEvidence)> = Vec::new();
    for (i, item) in evidence.iter().enumerate() {
        included.push((i + 1, item));
        if cost(&included) > budget_tokens {
            included.pop();
            break;
        }
    }

    let (passages, triples) = render_sections(&included);
    Ok(vec![
        Message::system(template.system.clone()),
        Message::user(template.render(query, &passages, &triples)),
    ])
}
