//! The assembled engine: loaded artifacts, per-role backends, and the
//! retrieve -> fuse -> prompt -> generate query path.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{EngineConfig, LlmRole};
use crate::corpus::DocumentChunk;
use crate::dense::{DenseIndex, Embedder};
use crate::error::{Error, Result};
use crate::fusion::{self, RankedEvidence};
use crate::graph::{self, KnowledgeGraph};
use crate::llm::{ChatBackend, Limiter};
use crate::prompt::{self, PromptTemplate};
use crate::sparse::{Channel, ScoredHit, SparseIndex};
use crate::text;

/// A generated answer with its evidence and per-stage wall-clock timings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub evidence: Vec<RankedEvidence>,
    pub timings_ms: BTreeMap<String, u64>,
    pub warnings: Vec<String>,
}

/// Retrieval-only result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Retrieval {
    pub evidence: Vec<RankedEvidence>,
    pub timings_ms: BTreeMap<String, u64>,
    pub warnings: Vec<String>,
}

/// Loaded artifacts plus role backends, ready to answer queries.
pub struct Engine {
    pub config: EngineConfig,
    pub sparse: Option<SparseIndex>,
    pub dense: Option<DenseIndex>,
    pub graph: Option<KnowledgeGraph>,
    chunk_texts: HashMap<String, String>,
    embedder: Box<dyn Embedder>,
    generator: Box<dyn ChatBackend>,
    template: PromptTemplate,
    pub limiter: Arc<Limiter>,
}

/// Stable evidence id for a rendered graph path.
pub fn path_hit_id(rendered: &str) -> String {
    format!("path-{}", text::fnv1a64_hex(rendered.as_bytes(), 0))
}

impl Engine {
    /// Load every enabled artifact named in the config. Missing files for
    /// enabled channels are an error; disabled channels are skipped.
    pub fn load(config: EngineConfig) -> Result<Self> {
        let limiter = Limiter::new(config.engine.max_inflight_llm);
        let generator = config.build_backend(LlmRole::Generator, Arc::clone(&limiter))?;
        let embedder = config.build_embedder()?;

        let chunks: Vec<DocumentChunk> = crate::jsonl::read_jsonl(&config.paths.chunks)?;
        let chunk_texts: HashMap<String, String> = chunks
            .iter()
            .map(|c| (c.chunk_id.clone(), c.text.clone()))
            .collect();

        let sparse = if config.sparse.enabled {
            Some(SparseIndex::load(&config.paths.sparse_index)?)
        } else {
            None
        };
        let dense = if config.dense.enabled {
            let index = DenseIndex::load(&config.paths.dense_index)?;
            if index.embedder_id() != embedder.id() {
                return Err(Error::Config(format!(
                    "dense index was built with embedder {:?} but config selects {:?}",
                    index.embedder_id(),
                    embedder.id()
                )));
            }
            Some(index)
        } else {
            None
        };
        let graph = if config.graph.enabled {
            Some(KnowledgeGraph::load(&config.paths.graph)?)
        } else {
            None
        };

        let template = match &config.paths.templates {
            Some(dir) => {
                let path = dir.join("generator.json");
                if path.exists() {
                    let t: PromptTemplate = serde_json::from_slice(&std::fs::read(&path)?)?;
                    t.validate()?;
                    t
                } else {
                    PromptTemplate::default()
                }
            }
            None => PromptTemplate::default(),
        };

        Ok(Engine {
            config,
            sparse,
            dense,
            graph,
            chunk_texts,
            embedder,
            generator,
            template,
            limiter,
        })
    }

    /// Build an engine from in-memory parts (tests and index-time reuse).
    pub fn from_parts(
        config: EngineConfig,
        chunks: &[DocumentChunk],
        sparse: Option<SparseIndex>,
        dense: Option<DenseIndex>,
        graph: Option<KnowledgeGraph>,
        generator: Box<dyn ChatBackend>,
    ) -> Result<Self> {
        let limiter = Limiter::new(config.engine.max_inflight_llm);
        let embedder = config.build_embedder()?;
        Ok(Engine {
            chunk_texts: chunks
                .iter()
                .map(|c| (c.chunk_id.clone(), c.text.clone()))
                .collect(),
            config,
            sparse,
            dense,
            graph,
            embedder,
            generator,
            template: PromptTemplate::default(),
            limiter,
        })
    }

    /// Run all enabled channels at depth `k`, normalize, and fuse to the
    /// top-k evidence set. A failing channel degrades to empty results with
    /// a warning rather than failing the query.
    pub fn retrieve(&self, query: &str, k: usize) -> Result<Retrieval> {
        if k == 0 {
            return Err(Error::InvalidInput("k must be >= 1".into()));
        }
        let mut timings = BTreeMap::new();
        let mut warnings = Vec::new();
        let mut path_texts: HashMap<String, String> = HashMap::new();

        let start = Instant::now();
        let dense_hits: Vec<ScoredHit> = match &self.dense {
            Some(index) => match self.embedder.embed(query) {
                Ok(query_vec) => {
                    if query_vec.iter().all(|x| *x == 0.0) {
                        warnings.push("dense: query embedding is the zero vector".into());
                    }
                    match index.search(&query_vec, k) {
                        Ok(hits) => hits,
                        Err(e) => {
                            warnings.push(format!("dense: {e}"));
                            Vec::new()
                        }
                    }
                }
                Err(e) => {
                    warnings.push(format!("dense: {e}"));
                    Vec::new()
                }
            },
            None => Vec::new(),
        };
        timings.insert("dense_ms".into(), start.elapsed().as_millis() as u64);

        let start = Instant::now();
        let sparse_hits: Vec<ScoredHit> = match &self.sparse {
            Some(index) => index.search(query, k),
            None => Vec::new(),
        };
        timings.insert("sparse_ms".into(), start.elapsed().as_millis() as u64);

        let start = Instant::now();
        let graph_hits: Vec<ScoredHit> = match &self.graph {
            Some(kg) => {
                let seeds = graph::link_entities(query, kg, self.config.graph.max_links);
                match graph::multi_hop_search(
                    kg,
                    &seeds,
                    self.config.graph.max_hops,
                    k,
                    self.config.graph.decay,
                ) {
                    Ok(paths) => paths
                        .iter()
                        .map(|p| {
                            let rendered = graph::render_path(p);
                            let id = path_hit_id(&rendered);
                            path_texts.insert(id.clone(), rendered);
                            ScoredHit {
                                id,
                                score: p.score,
                                channel: Channel::Graph,
                            }
                        })
                        .collect(),
                    Err(e) => {
                        warnings.push(format!("graph: {e}"));
                        Vec::new()
                    }
                }
            }
            None => Vec::new(),
        };
        timings.insert("graph_ms".into(), start.elapsed().as_millis() as u64);

        let start = Instant::now();
        let fusion_cfg = fusion::FusionConfig {
            top_n: k,
            ..self.config.fusion
        };
        let evidence = fusion::fuse(
            &fusion::normalize_channel(dense_hits),
            &fusion::normalize_channel(sparse_hits),
            &fusion::normalize_channel(graph_hits),
            &fusion_cfg,
            &|id: &str| {
                self.chunk_texts
                    .get(id)
                    .or_else(|| path_texts.get(id))
                    .cloned()
            },
        )?;
        timings.insert("fuse_ms".into(), start.elapsed().as_millis() as u64);

        Ok(Retrieval {
            evidence,
            timings_ms: timings,
            warnings,
        })
    }

    /// Full query path: retrieve, build the augmented prompt, and complete.
    pub fn answer(&self, query: &str) -> Result<Answer> {
        self.answer_with_k(query, self.config.fusion.top_n)
    }

    /// [`Engine::answer`] with an explicit evidence count.
    pub fn answer_with_k(&self, query: &str, k: usize) -> Result<Answer> {
        let retrieval = self.retrieve(query, k)?;
        let mut timings = retrieval.timings_ms;

        let start = Instant::now();
        let messages = prompt::build_prompt(
            query,
            &retrieval.evidence,
            &self.template,
            self.config.generation.budget_tokens,
        )?;
        timings.insert("prompt_ms".into(), start.elapsed().as_millis() as u64);

        let start = Instant::now();
        let text = self.generator.complete(&messages)?;
        timings.insert("llm_ms".into(), start.elapsed().as_millis() as u64);

        Ok(Answer {
            text,
            evidence: retrieval.evidence,
            timings_ms: timings,
            warnings: retrieval.warnings,
        })
    }

    pub fn generator_id(&self) -> String {
        self.generator.describe()
    }
}
