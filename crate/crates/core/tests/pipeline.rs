//! End-to-end flow over the bundled fixture corpus: clean, chunk, classify,
//! index all three channels, and answer queries offline.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use trellis_core::benchmark::{self, ReplayedAnswer};
use trellis_core::config::EngineConfig;
use trellis_core::corpus::{
    chunk_document, classify_chunk, filter_by_taxonomy, parse_document, ChunkConfig,
    CleaningConfig, DocumentChunk, RawDocument, Source, Taxonomy,
};
use trellis_core::dense::DenseIndex;
use trellis_core::engine::Engine;
use trellis_core::graph::{extract_corpus, KnowledgeGraph, PatternExtractor};
use trellis_core::jsonl;
use trellis_core::llm::EchoBackend;
use trellis_core::sparse::{BmParams, SparseIndex};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn load_fixture_chunks() -> (Vec<DocumentChunk>, Taxonomy) {
    let taxonomy = Taxonomy::load(&fixtures().join("taxonomy.json")).unwrap();
    let corpus_dir = fixtures().join("corpus");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&corpus_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert_eq!(files.len(), 20, "fixture corpus is 20 documents");

    let mut chunks = Vec::new();
    for file in files {
        let id = file.file_stem().unwrap().to_string_lossy().to_string();
        let raw = RawDocument {
            id: id.clone(),
            source: Source::Paper,
            title: id.clone(),
            body: std::fs::read_to_string(&file).unwrap(),
        };
        let clean = parse_document(&raw, &CleaningConfig::default()).unwrap();
        for chunk in chunk_document(&clean, &ChunkConfig::default()).unwrap() {
            chunks.push(classify_chunk(&chunk, &taxonomy));
        }
    }
    (chunks, taxonomy)
}

#[test]
fn fixture_corpus_cleans_chunks_and_classifies() {
    let (chunks, taxonomy) = load_fixture_chunks();
    assert!(chunks.len() >= 20);
    // Noise never survives cleaning.
    for chunk in &chunks {
        assert!(!chunk.text.contains("References"));
        assert!(!chunk.text.lines().any(|l| l.trim() == "42" || l.trim() == "iv"));
    }
    // The taxonomy labels land: every domain is hit somewhere.
    let mut seen = std::collections::HashSet::new();
    for chunk in &chunks {
        for d in &chunk.domains {
            seen.insert(d.clone());
        }
    }
    assert_eq!(seen.len(), taxonomy.domains().len(), "all nine domains hit");
}

#[test]
fn taxonomy_filter_keeps_keyword_bearing_chunks() {
    let (chunks, taxonomy) = load_fixture_chunks();
    let kept = filter_by_taxonomy(&chunks, &taxonomy, 1.0, BmParams::default()).unwrap();
    assert!(!kept.is_empty());
    assert!(kept.len() <= chunks.len());
    // Chunks with keyword hits score well above 1.0 on their own domain.
    let labeled: Vec<&DocumentChunk> =
        chunks.iter().filter(|c| !c.keyword_hits.is_empty()).collect();
    let kept_ids: std::collections::HashSet<&str> =
        kept.iter().map(|c| c.chunk_id.as_str()).collect();
    for c in labeled {
        assert!(kept_ids.contains(c.chunk_id.as_str()), "{} dropped", c.chunk_id);
    }
}

fn build_engine(chunks: &[DocumentChunk]) -> Engine {
    let config = EngineConfig::default();
    let sparse = SparseIndex::build(chunks, BmParams::default()).unwrap();
    let embedder = config.build_embedder().unwrap();
    let dense = DenseIndex::build(chunks, embedder.as_ref()).unwrap();
    let (triples, failures) = extract_corpus(chunks, &PatternExtractor::default());
    assert!(failures.is_empty());
    assert!(!triples.is_empty(), "fixture corpus yields triples");
    let graph = KnowledgeGraph::build(&triples);
    Engine::from_parts(
        config,
        chunks,
        Some(sparse),
        Some(dense),
        Some(graph),
        Box::new(EchoBackend),
    )
    .unwrap()
}

#[test]
fn fixture_queries_retrieve_expected_documents() {
    let (chunks, _) = load_fixture_chunks();
    let engine = build_engine(&chunks);

    let retrieval = engine.retrieve("how to control wheat rust", 8).unwrap();
    assert!(retrieval
        .evidence
        .iter()
        .any(|e| e.id.starts_with("wheat_rust")));

    let retrieval = engine.retrieve("drip irrigation water savings", 8).unwrap();
    assert!(retrieval
        .evidence
        .iter()
        .any(|e| e.id.starts_with("drip_irrigation")));
}

#[test]
fn full_answer_path_is_deterministic_on_fixture_corpus() {
    let (chunks, _) = load_fixture_chunks();
    let engine = build_engine(&chunks);
    let a = engine.answer("what causes late blight and how is it timed").unwrap();
    let b = engine.answer("what causes late blight and how is it timed").unwrap();
    assert_eq!(a.text, b.text);
    assert_eq!(a.evidence, b.evidence);
    assert!(!a.text.is_empty());
}

#[test]
fn benchmark_fixture_runs_with_replayed_answers() {
    let tasks = benchmark::load_tasks(&fixtures().join("bench/tasks.jsonl"), None).unwrap();
    assert_eq!(tasks.len(), 10);

    let rows: Vec<ReplayedAnswer> =
        jsonl::read_jsonl(&fixtures().join("bench/answers.jsonl")).unwrap();
    let answers: HashMap<String, String> =
        rows.into_iter().map(|r| (r.id, r.answer)).collect();
    let answerer = benchmark::replay_answerer(answers);

    let report = benchmark::run_benchmark(
        &tasks,
        &answerer,
        None,
        benchmark::RunConfig::default(),
    )
    .unwrap();
    assert_eq!(report.evaluated_count, 10);
    assert!(report.metrics.bleu > 0.0);
    assert!(report.metrics.rouge1.f1 > 30.0);
    assert!(report.by_difficulty.contains_key("easy"));
    assert!(report.by_difficulty.contains_key("hard"));

    // Identity answers: perfect surface scores.
    let rows: Vec<ReplayedAnswer> =
        jsonl::read_jsonl(&fixtures().join("bench/identity_answers.jsonl")).unwrap();
    let answers: HashMap<String, String> =
        rows.into_iter().map(|r| (r.id, r.answer)).collect();
    let answerer = benchmark::replay_answerer(answers);
    let report = benchmark::run_benchmark(
        &tasks,
        &answerer,
        None,
        benchmark::RunConfig::default(),
    )
    .unwrap();
    assert!((report.metrics.bleu - 100.0).abs() < 1e-9);
    assert!((report.metrics.rouge_l.f1 - 100.0).abs() < 1e-9);

    // The fixture report numbers equal an independently scripted
    // per-task mean over the same pairs.
    let rows: Vec<ReplayedAnswer> =
        jsonl::read_jsonl(&fixtures().join("bench/answers.jsonl")).unwrap();
    let answers: HashMap<String, String> =
        rows.into_iter().map(|r| (r.id, r.answer)).collect();
    let answerer = benchmark::replay_answerer(answers.clone());
    let report = benchmark::run_benchmark(
        &tasks,
        &answerer,
        None,
        benchmark::RunConfig::default(),
    )
    .unwrap();

    let n = tasks.len() as f64;
    let mut oracle_bleu = 0.0;
    let mut oracle_meteor = 0.0;
    let mut oracle_rouge1_f = 0.0;
    let mut oracle_rouge_l_f = 0.0;
    for task in &tasks {
        let answer = &answers[&task.id];
        oracle_bleu +=
            trellis_core::metrics::bleu(answer, &[task.reference.clone()], 4).unwrap();
        oracle_meteor += trellis_core::metrics::meteor_like(answer, &task.reference);
        oracle_rouge1_f += trellis_core::metrics::rouge_n(answer, &task.reference, 1).f1;
        oracle_rouge_l_f += trellis_core::metrics::rouge_l(answer, &task.reference).f1;
    }
    assert!((report.metrics.bleu - oracle_bleu / n).abs() < 1e-9);
    assert!((report.metrics.meteor - oracle_meteor / n).abs() < 1e-9);
    assert!((report.metrics.rouge1.f1 - oracle_rouge1_f / n).abs() < 1e-9);
    assert!((report.metrics.rouge_l.f1 - oracle_rouge_l_f / n).abs() < 1e-9);
}

#[test]
fn engine_load_rejects_mismatched_embedding_space() {
    let (chunks, _) = load_fixture_chunks();
    let dir = tempfile::tempdir().unwrap();
    let mut config = EngineConfig::default();
    config.paths.chunks = dir.path().join("chunks.jsonl");
    config.paths.sparse_index = dir.path().join("sparse.json");
    config.paths.dense_index = dir.path().join("dense.json");
    config.graph.enabled = false;

    jsonl::write_jsonl(&config.paths.chunks, &chunks).unwrap();
    SparseIndex::build(&chunks, BmParams::default())
        .unwrap()
        .save(&config.paths.sparse_index)
        .unwrap();
    // Index built in a different embedding space (other dim).
    let other = trellis_core::dense::HashedBowEmbedder::new(64, 0);
    DenseIndex::build(&chunks, &other)
        .unwrap()
        .save(&config.paths.dense_index)
        .unwrap();

    let err = match Engine::load(config) {
        Err(e) => e,
        Ok(_) => panic!("mismatched embedding space must not load"),
    };
    assert!(err.to_string().contains("embedder"), "{err}");
}
