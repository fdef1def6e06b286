//! `trellis index` — build and persist the three channel artifacts.

use std::sync::Arc;

use trellis_core::config::{EngineConfig, ExtractorKind, LlmRole};
use trellis_core::corpus::DocumentChunk;
use trellis_core::dense::DenseIndex;
use trellis_core::error::{Error, Result};
use trellis_core::graph::{
    extract_corpus, KnowledgeGraph, LlmExtractor, PatternExtractor, Triple, TripleExtractor,
    DEFAULT_EXTRACTOR_TEMPLATE,
};
use trellis_core::jsonl;
use trellis_core::llm::Limiter;
use trellis_core::sparse::{BmParams, SparseIndex};

pub fn index(config: &EngineConfig) -> Result<()> {
    let chunks: Vec<DocumentChunk> = jsonl::read_jsonl(&config.paths.chunks)?;
    if chunks.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no chunks in {}",
            config.paths.chunks.display()
        )));
    }
    let mut failed = false;

    if config.sparse.enabled {
        let built = SparseIndex::build_with_stopwords(
            &chunks,
            BmParams {
                k1: config.sparse.k1,
                b: config.sparse.b,
            },
            &config.sparse.stopwords,
        )
        .and_then(|ix| {
            ix.save(&config.paths.sparse_index)?;
            Ok(ix.doc_count())
        });
        match built {
            Ok(n) => println!(
                "sparse: indexed {n} chunks -> {}",
                config.paths.sparse_index.display()
            ),
            Err(e) => {
                eprintln!("sparse failed: {e}");
                failed = true;
            }
        }
    }

    if config.dense.enabled {
        let built = config.build_embedder().and_then(|embedder| {
            let ix = DenseIndex::build(&chunks, embedder.as_ref())?;
            ix.save(&config.paths.dense_index)?;
            Ok((ix.len(), ix.embedder_id().to_string()))
        });
        match built {
            Ok((n, id)) => println!(
                "dense: embedded {n} chunks with {id} -> {}",
                config.paths.dense_index.display()
            ),
            Err(e) => {
                eprintln!("dense failed: {e}");
                failed = true;
            }
        }
    }

    if config.graph.enabled {
        match build_graph_artifacts(config, &chunks) {
            Ok((triple_count, entity_count)) => println!(
                "graph: {triple_count} triples over {entity_count} entities -> {}",
                config.paths.graph.display()
            ),
            Err(e) => {
                eprintln!("graph failed: {e}");
                failed = true;
            }
        }
    }

    if failed {
        return Err(Error::Config("one or more artifacts failed to build".into()));
    }
    Ok(())
}

fn build_graph_artifacts(
    config: &EngineConfig,
    chunks: &[DocumentChunk],
) -> Result<(usize, usize)> {
    let limiter = Limiter::new(config.engine.max_inflight_llm);
    let llm_backend;
    let extractor: Box<dyn TripleExtractor> = match config.graph.extractor {
        ExtractorKind::Pattern => Box::new(PatternExtractor::new(
            &config.graph.verbs,
            config.graph.pattern_confidence,
        )),
        ExtractorKind::Llm => {
            llm_backend = config.build_backend(LlmRole::Extractor, Arc::clone(&limiter))?;
            Box::new(LlmExtractor::new(
                llm_backend.as_ref(),
                DEFAULT_EXTRACTOR_TEMPLATE,
            ))
        }
    };

    let (mut triples, failures) = extract_corpus(chunks, extractor.as_ref());
    for (chunk_id, error) in &failures {
        eprintln!("extraction failed for {chunk_id}: {error}");
    }
    if !failures.is_empty() && triples.is_empty() {
        return Err(Error::Backend("triple extraction produced nothing".into()));
    }

    if config.graph.reverse_edges {
        let reversed: Vec<Triple> = triples
            .iter()
            .filter_map(|t| {
                Triple::new(
                    &t.tail,
                    &format!("inverse {}", t.relation),
                    &t.head,
                    &t.source_chunk,
                    t.confidence,
                )
                .ok()
            })
            .collect();
        triples.extend(reversed);
    }

    jsonl::write_jsonl(&config.paths.triples, &triples)?;
    let graph = KnowledgeGraph::build(&triples);
    graph.save(&config.paths.graph)?;
    Ok((graph.triple_count(), graph.entity_count()))
}
