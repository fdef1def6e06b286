//! Knowledge graph: triple extraction, construction, and multi-hop search.

mod extract;
mod search;

pub use extract::{
    extract_corpus, extract_triples, LlmExtractor, PatternExtractor, TripleExtractor,
    DEFAULT_EXTRACTOR_TEMPLATE, DEFAULT_VERBS,
};
pub use search::{link_entities, multi_hop_search, path_score, render_path};

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Collapse whitespace runs, trim, and lowercase.
pub fn normalize_entity(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// A (head, relation, tail) fact with provenance and confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub source_chunk: String,
    pub confidence: f64,
}

impl Triple {
    /// Normalize all three parts and validate the invariants.
    pub fn new(
        head: &str,
        relation: &str,
        tail: &str,
        source_chunk: &str,
        confidence: f64,
    ) -> Result<Self> {
        let head = normalize_entity(head);
        let relation = normalize_entity(relation);
        let tail = normalize_entity(tail);
        if head.is_empty() || relation.is_empty() || tail.is_empty() {
            return Err(Error::InvalidInput(
                "triple parts must be non-empty after normalization".into(),
            ));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidInput(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Triple {
            head,
            relation,
            tail,
            source_chunk: source_chunk.to_string(),
            confidence,
        })
    }
}

/// A directed edge in the graph's adjacency lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub relation: String,
    pub neighbor: usize,
    pub confidence: f64,
    pub source_chunk: String,
}

/// Directed knowledge graph with integer entity ids assigned in first-seen
/// order. Duplicate (head, relation, tail) triples merge keeping the highest
/// confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    entities: Vec<String>,
    ids: HashMap<String, usize>,
    adjacency: Vec<Vec<Edge>>,
    triple_count: usize,
}

/// One edge of an evidence path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEdge {
    pub relation: String,
    pub confidence: f64,
    pub source_chunk: String,
}

/// A simple directed path found by multi-hop search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidencePath {
    pub nodes: Vec<String>,
    pub edges: Vec<PathEdge>,
    pub score: f64,
}

impl EvidencePath {
    pub fn hops(&self) -> usize {
        self.edges.len()
    }
}

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct GraphFile {
    format_version: u32,
    triple_count: usize,
    entities: Vec<String>,
    /// (head id, relation, tail id, confidence, source chunk)
    edges: Vec<(usize, String, usize, f64, String)>,
}

impl KnowledgeGraph {
    /// Build from triples. On duplicate (h, r, t) the highest confidence
    /// wins; confidence ties keep the lexicographically smallest source
    /// chunk, so any permutation of the input yields the same graph content.
    pub fn build(triples: &[Triple]) -> Self {
        let mut entities: Vec<String> = Vec::new();
        let mut ids: HashMap<String, usize> = HashMap::new();
        let intern = |name: &str, entities: &mut Vec<String>, ids: &mut HashMap<String, usize>| {
            if let Some(&id) = ids.get(name) {
                return id;
            }
            let id = entities.len();
            entities.push(name.to_string());
            ids.insert(name.to_string(), id);
            id
        };

        // (head, relation, tail) -> (confidence, source_chunk)
        let mut merged: HashMap<(usize, String, usize), (f64, String)> = HashMap::new();
        for t in triples {
            let h = intern(&t.head, &mut entities, &mut ids);
            let ta = intern(&t.tail, &mut entities, &mut ids);
            let key = (h, t.relation.clone(), ta);
            match merged.get_mut(&key) {
                None => {
                    merged.insert(key, (t.confidence, t.source_chunk.clone()));
                }
                Some((conf, src)) => {
                    if t.confidence > *conf
                        || (t.confidence == *conf && t.source_chunk < *src)
                    {
                        *conf = t.confidence;
                        *src = t.source_chunk.clone();
                    }
                }
            }
        }

        let mut adjacency: Vec<Vec<Edge>> = vec![Vec::new(); entities.len()];
        let triple_count = merged.len();
        for ((h, relation, tail), (confidence, source_chunk)) in merged {
            adjacency[h].push(Edge {
                relation,
                neighbor: tail,
                confidence,
                source_chunk,
            });
        }
        for list in &mut adjacency {
            list.sort_by(|a, b| a.relation.cmp(&b.relation).then(a.neighbor.cmp(&b.neighbor)));
        }

        KnowledgeGraph {
            entities,
            ids,
            adjacency,
            triple_count,
        }
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triple_count
    }

    pub fn entity_id(&self, name: &str) -> Option<usize> {
        self.ids.get(&normalize_entity(name)).copied()
    }

    pub fn entity_name(&self, id: usize) -> &str {
        &self.entities[id]
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn edges_from(&self, id: usize) -> &[Edge] {
        self.adjacency.get(id).map_or(&[], Vec::as_slice)
    }

    /// The merged triples in a canonical (head, relation, tail) order,
    /// independent of input permutation.
    pub fn canonical_triples(&self) -> Vec<Triple> {
        let mut out: Vec<Triple> = self
            .adjacency
            .iter()
            .enumerate()
            .flat_map(|(h, edges)| {
                edges.iter().map(move |e| Triple {
                    head: self.entities[h].clone(),
                    relation: e.relation.clone(),
                    tail: self.entities[e.neighbor].clone(),
                    source_chunk: e.source_chunk.clone(),
                    confidence: e.confidence,
                })
            })
            .collect();
        out.sort_by(|a, b| {
            a.head
                .cmp(&b.head)
                .then_with(|| a.relation.cmp(&b.relation))
                .then_with(|| a.tail.cmp(&b.tail))
        });
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut edges: Vec<(usize, String, usize, f64, String)> = self
            .adjacency
            .iter()
            .enumerate()
            .flat_map(|(h, list)| {
                list.iter().map(move |e| {
                    (
                        h,
                        e.relation.clone(),
                        e.neighbor,
                        e.confidence,
                        e.source_chunk.clone(),
                    )
                })
            })
            .collect();
        edges.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)).then_with(|| a.2.cmp(&b.2)));
        let file = GraphFile {
            format_version: FORMAT_VERSION,
            triple_count: self.triple_count,
            entities: self.entities.clone(),
            edges,
        };
        let mut bytes = serde_json::to_vec_pretty(&file)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: GraphFile = serde_json::from_slice(&std::fs::read(path)?)?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported graph format_version {}",
                file.format_version
            )));
        }
        let ids: HashMap<String, usize> = file
            .entities
            .iter()
            .enumerate()
            .map(|(i, name)| (name.clone(), i))
            .collect();
        let mut adjacency: Vec<Vec<Edge>> = vec![Vec::new(); file.entities.len()];
        for (h, relation, tail, confidence, source_chunk) in file.edges {
            if h >= adjacency.len() || tail >= file.entities.len() {
                return Err(Error::InvalidInput("graph edge id out of range".into()));
            }
            adjacency[h].push(Edge {
                relation,
                neighbor: tail,
                confidence,
                source_chunk,
            });
        }
        for list in &mut adjacency {
            list.sort_by(|a, b| a.relation.cmp(&b.relation).then(a.neighbor.cmp(&b.neighbor)));
        }
        Ok(KnowledgeGraph {
            entities: file.entities,
            ids,
            adjacency,
            triple_count: file.triple_count,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(h: &str, r: &str, ta: &str, conf: f64) -> Triple {
        Triple::new(h, r, ta, "c1", conf).unwrap()
    }

    #[test]
    fn normalization_collapses_whitespace_and_case() {
        assert_eq!(normalize_entity("  Wheat   Rust "), "wheat rust");
    }

    #[test]
    fn empty_parts_are_rejected() {
        assert!(Triple::new("", "causes", "b", "c", 1.0).is_err());
        assert!(Triple::new("a", "  ", "b", "c", 1.0).is_err());
        assert!(Triple::new("a", "causes", "b", "c", 1.5).is_err());
    }

    #[test]
    fn empty_triple_list_builds_empty_graph() {
        let g = KnowledgeGraph::build(&[]);
        assert_eq!(g.entity_count(), 0);
        assert_eq!(g.triple_count(), 0);
    }

    #[test]
    fn duplicate_triples_merge_keeping_max_confidence() {
        let g = KnowledgeGraph::build(&[t("a", "causes", "b", 0.4), t("a", "causes", "b", 0.9)]);
        assert_eq!(g.triple_count(), 1);
        let edges = g.edges_from(g.entity_id("a").unwrap());
        assert_eq!(edges.len(), 1);
        assert_eq!(edges[0].confidence, 0.9);
    }

    #[test]
    fn triple_count_equals_distinct_triples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let names = ["a", "b", "c", "d"];
        let rels = ["r1", "r2"];
        let triples: Vec<Triple> = (0..10)
            .map(|_| {
                t(
                    names[rng.gen_range(0..names.len())],
                    rels[rng.gen_range(0..rels.len())],
                    names[rng.gen_range(0..names.len())],
                    1.0,
                )
            })
            .collect();
        let distinct: std::collections::HashSet<(String, String, String)> = triples
            .iter()
            .map(|t| (t.head.clone(), t.relation.clone(), t.tail.clone()))
            .collect();
        assert_eq!(KnowledgeGraph::build(&triples).triple_count(), distinct.len());
    }

    #[test]
    fn permutations_build_identical_canonical_content() {
        let mut triples = vec![
            t("a", "causes", "b", 0.8),
            t("b", "treats", "c", 0.7),
            t("a", "treats", "c", 0.6),
            t("c", "affects", "a", 0.9),
        ];
        let g1 = KnowledgeGraph::build(&triples);
        triples.reverse();
        let g2 = KnowledgeGraph::build(&triples);
        assert_eq!(g1.canonical_triples(), g2.canonical_triples());
        assert_eq!(g1.triple_count(), g2.triple_count());
    }

    #[test]
    fn save_load_round_trips() {
        let g = KnowledgeGraph::build(&[t("a", "causes", "b", 0.8), t("b", "treats", "c", 0.7)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.json");
        g.save(&path).unwrap();
        let loaded = KnowledgeGraph::load(&path).unwrap();
        assert_eq!(g, loaded);
    }
}
