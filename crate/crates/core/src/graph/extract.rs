//! Triple extraction from chunks: an LLM-backed extractor parsing a strict
//! line format, and a deterministic pattern extractor for offline runs.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::corpus::DocumentChunk;
use crate::error::{Error, Result};
use crate::graph::Triple;
use crate::llm::{ChatBackend, Message};
use crate::text;

pub trait TripleExtractor: Send + Sync {
    fn extract(&self, chunk: &DocumentChunk) -> Result<Vec<Triple>>;
}

/// Extract triples from one chunk; every triple carries the chunk id as its
/// source. Returns an empty list (not an error) when nothing is extractable.
pub fn extract_triples(
    chunk: &DocumentChunk,
    extractor: &dyn TripleExtractor,
) -> Result<Vec<Triple>> {
    extractor.extract(chunk)
}

/// Run an extractor over many chunks. Chunk order fixes output order;
/// per-chunk failures are collected rather than aborting the run.
pub fn extract_corpus(
    chunks: &[DocumentChunk],
    extractor: &dyn TripleExtractor,
) -> (Vec<Triple>, Vec<(String, Error)>) {
    #[cfg(feature = "parallel")]
    let results: Vec<Result<Vec<Triple>>> =
        chunks.par_iter().map(|c| extractor.extract(c)).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<Vec<Triple>>> = chunks.iter().map(|c| extractor.extract(c)).collect();

    let mut triples = Vec::new();
    let mut failures = Vec::new();
    for (chunk, result) in chunks.iter().zip(results) {
        match result {
            Ok(ts) => triples.extend(ts),
            Err(e) => failures.push((chunk.chunk_id.clone(), e)),
        }
    }
    (triples, failures)
}

/// Default prompt for the LLM-backed extractor.
pub const DEFAULT_EXTRACTOR_TEMPLATE: &str = "List the factual triples stated in the passage, \
one per line, formatted exactly as: head | relation | tail. Optionally append | confidence \
(0 to 1). No other text.\n\nPassage:\n{text}";

/// Offline extractor matching "X <verb phrase> Y" within single sentences
/// against a closed verb list. Assigns a fixed confidence.
#[derive(Debug, Clone)]
pub struct PatternExtractor {
    verbs: Vec<Vec<String>>,
    confidence: f64,
}

/// Verb phrases recognized by the default pattern extractor.
pub const DEFAULT_VERBS: [&str; 10] = [
    "causes",
    "treats",
    "infects",
    "prevents",
    "reduces",
    "improves",
    "requires",
    "increases",
    "affects",
    "produces",
];

impl PatternExtractor {
    pub fn new(verbs: &[String], confidence: f64) -> Self {
        PatternExtractor {
            verbs: verbs.iter().map(|v| text::tokenize(v)).collect(),
            confidence,
        }
    }
}

impl Default for PatternExtractor {
    fn default() -> Self {
        let verbs: Vec<String> = DEFAULT_VERBS.iter().map(|s| s.to_string()).collect();
        PatternExtractor::new(&verbs, 0.9)
    }
}

impl TripleExtractor for PatternExtractor {
    fn extract(&self, chunk: &DocumentChunk) -> Result<Vec<Triple>> {
        let mut out = Vec::new();
        for sentence in chunk.text.split(['.', '!', '?', ';', '\n']) {
            let tokens = text::tokenize(sentence);
            if tokens.len() < 3 {
                continue;
            }
            // Leftmost verb match wins; longer phrases beat shorter at the
            // same position. One triple per sentence.
            let mut best: Option<(usize, &Vec<String>)> = None;
            for verb in &self.verbs {
                if verb.is_empty() {
                    continue;
                }
                for start in 0..tokens.len().saturating_sub(verb.len() - 1) {
                    if &tokens[start..start + verb.len()] == verb.as_slice() {
                        let better = match best {
                            None => true,
                            Some((s, v)) => start < s || (start == s && verb.len() > v.len()),
                        };
                        if better {
                            best = Some((start, verb));
                        }
                        break;
                    }
                }
            }
            if let Some((start, verb)) = best {
                let head = tokens[..start].join(" ");
                let tail = tokens[start + verb.len()..].join(" ");
                if !head.is_empty() && !tail.is_empty() {
                    out.push(Triple::new(
                        &head,
                        &verb.join(" "),
                        &tail,
                        &chunk.chunk_id,
                        self.confidence,
                    )?);
                }
            }
        }
        Ok(out)
    }
}

/// LLM-backed extractor. The model is asked for one `head | relation | tail`
/// line per fact (optionally `| confidence`); malformed lines are dropped.
pub struct LlmExtractor<'a> {
    backend: &'a dyn ChatBackend,
    template: String,
}

impl<'a> LlmExtractor<'a> {
    pub fn new(backend: &'a dyn ChatBackend, template: impl Into<String>) -> Self {
        LlmExtractor {
            backend,
            template: template.into(),
        }
    }
}

/// Parse a model reply in the strict line format. Malformed lines (wrong
/// part count, empty parts, unparseable confidence) are discarded.
pub fn parse_triple_lines(reply: &str, source_chunk: &str) -> Vec<Triple> {
    let mut out = Vec::new();
    for line in reply.lines() {
        let parts: Vec<&str> = line.split('|').map(str::trim).collect();
        let (head, relation, tail, confidence) = match parts.as_slice() {
            [h, r, t] => (h, r, t, 1.0),
            [h, r, t, c] => match c.parse::<f64>() {
                Ok(conf) => (h, r, t, conf),
                Err(_) => continue,
            },
            _ => continue,
        };
        if let Ok(triple) = Triple::new(head, relation, tail, source_chunk, confidence) {
            out.push(triple);
        }
    }
    out
}

impl TripleExtractor for LlmExtractor<'_> {
    fn extract(&self, chunk: &DocumentChunk) -> Result<Vec<Triple>> {
        let prompt = self.template.replace("{text}", &chunk.text);
        let reply = self.backend.complete(&[Message::user(prompt)])?;
        Ok(parse_triple_lines(&reply, &chunk.chunk_id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::token_count;

    fn chunk(id: &str, textv: &str) -> DocumentChunk {
        DocumentChunk {
            chunk_id: id.into(),
            doc_id: "d".into(),
            text: textv.into(),
            token_count: token_count(textv),
            domains: vec![],
            keyword_hits: vec![],
        }
    }

    #[test]
    fn pattern_extractor_matches_single_verb_sentence() {
        let triples = PatternExtractor::default()
            .extract(&chunk("c1", "wheat rust infects wheat"))
            .unwrap();
        assert_eq!(triples.len(), 1);
        assert_eq!(triples[0].head, "wheat rust");
        assert_eq!(triples[0].relation, "infects");
        assert_eq!(triples[0].tail, "wheat");
        assert_eq!(triples[0].source_chunk, "c1");
        assert_eq!(triples[0].confidence, 0.9);
    }

    // The fixture paragraph hand-applies the pattern rule: five sentences,
    // each with exactly one closed-list verb, yield exactly these triples.
    #[test]
    fn pattern_extractor_on_fixture_paragraph() {
        let paragraph = "Wheat rust infects wheat. Crop rotation prevents soil depletion. \
             Drip irrigation reduces water use. Compost improves soil structure. \
             Drought causes yield loss.";
        let triples = PatternExtractor::default()
            .extract(&chunk("c9", paragraph))
            .unwrap();
        let got: Vec<(String, String, String)> = triples
            .into_iter()
            .map(|t| (t.head, t.relation, t.tail))
            .collect();
        assert_eq!(
            got,
            vec![
                ("wheat rust".into(), "infects".into(), "wheat".into()),
                ("crop rotation".into(), "prevents".into(), "soil depletion".into()),
                ("drip irrigation".into(), "reduces".into(), "water use".into()),
                ("compost".into(), "improves".into(), "soil structure".into()),
                ("drought".into(), "causes".into(), "yield loss".into()),
            ]
        );
    }

    #[test]
    fn pattern_extractor_ignores_unmatched_sentences() {
        let triples = PatternExtractor::default()
            .extract(&chunk("c1", "no pattern here at all"))
            .unwrap();
        assert!(triples.is_empty());
    }

    #[test]
    fn llm_reply_parsing_drops_malformed_lines() {
        let triples = parse_triple_lines("a | causes | b\ngarbage line\nc | treats | d", "c7");
        assert_eq!(triples.len(), 2);
        assert_eq!(triples[0].relation, "causes");
        assert_eq!(triples[1].relation, "treats");
        assert!(triples.iter().all(|t| t.source_chunk == "c7"));
        assert!(triples.iter().all(|t| t.confidence == 1.0));
    }

    #[test]
    fn llm_reply_trailing_confidence_field() {
        let triples = parse_triple_lines("a | causes | b | 0.45\na | causes | c | bogus", "c7");
        assert_eq!(triples.len(), 1);
        assert_eq!(triples[0].confidence, 0.45);
    }

    #[test]
    fn llm_extractor_end_to_end_with_scripted_backend() {
        use crate::llm::ScriptedBackend;
        let backend = ScriptedBackend::new("extractor")
            .respond_default("wheat rust | infects | wheat\nnot a triple\nrust | reduces | yield | 0.8");
        let extractor = LlmExtractor::new(&backend, DEFAULT_EXTRACTOR_TEMPLATE);
        let triples = extract_triples(&chunk("c3", "some passage"), &extractor).unwrap();
        assert_eq!(triples.len(), 2);
        assert_eq!(triples[0].confidence, 1.0);
        assert_eq!(triples[1].confidence, 0.8);
        assert!(triples.iter().all(|t| t.source_chunk == "c3"));
    }

    #[test]
    fn corpus_extraction_merges_in_chunk_order() {
        let chunks = vec![
            chunk("c1", "Drought causes yield loss."),
            chunk("c2", "Compost improves soil structure."),
        ];
        let (triples, failures) = extract_corpus(&chunks, &PatternExtractor::default());
        assert!(failures.is_empty());
        assert_eq!(triples[0].source_chunk, "c1");
        assert_eq!(triples[1].source_chunk, "c2");
    }
}
