//! `trellis ingest` — clean, chunk, classify, and write the chunks file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use trellis_core::config::EngineConfig;
use trellis_core::corpus::{
    chunk_document, classify_chunk, filter_by_taxonomy, parse_document, DocumentChunk,
    RawDocument, Source, Taxonomy,
};
use trellis_core::error::{Error, Result};
use trellis_core::jsonl;
use trellis_core::sparse::BmParams;

fn read_documents(input: &Path) -> Result<Vec<RawDocument>> {
    if input.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(input)?
            .filter_map(|entry| {
                let path = entry.ok()?.path();
                let ext = path.extension()?.to_str()?.to_ascii_lowercase();
                (ext == "md" || ext == "txt").then_some(path)
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::InvalidInput(format!(
                "no .md or .txt files in {}",
                input.display()
            )));
        }
        files
            .into_iter()
            .map(|path| {
                let id = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().to_string())
                    .unwrap_or_default();
                Ok(RawDocument {
                    id,
                    source: Source::Other,
                    title: String::new(),
                    body: std::fs::read_to_string(&path)?,
                })
            })
            .collect()
    } else if input.extension().is_some_and(|e| e == "jsonl") {
        let docs: Vec<RawDocument> = jsonl::read_jsonl(input)?;
        if docs.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{} contains no documents",
                input.display()
            )));
        }
        Ok(docs)
    } else {
        Err(Error::InvalidInput(format!(
            "input must be a directory or a .jsonl file: {}",
            input.display()
        )))
    }
}

pub fn ingest(config: &EngineConfig, input: &Path) -> Result<()> {
    let taxonomy = Taxonomy::load(&config.paths.taxonomy)?;
    let mut documents = read_documents(input)?;
    documents.sort_by(|a, b| a.id.cmp(&b.id));

    let mut chunks: Vec<DocumentChunk> = Vec::new();
    let mut ingested = 0usize;
    let mut skipped = 0usize;
    let mut failures: Vec<(String, String)> = Vec::new();

    for doc in &documents {
        if let Err(e) = doc.validate() {
            failures.push((doc.id.clone(), e.to_string()));
            continue;
        }
        if doc.source == Source::QaDataset && doc.body.trim().is_empty() {
            skipped += 1; // QA records carry no corpus text
            continue;
        }
        match parse_document(doc, &config.corpus.cleaning) {
            Ok(clean) => match chunk_document(&clean, &config.corpus.chunking) {
                Ok(doc_chunks) => {
                    chunks.extend(doc_chunks.iter().map(|c| classify_chunk(c, &taxonomy)));
                    ingested += 1;
                }
                Err(e) => failures.push((doc.id.clone(), e.to_string())),
            },
            Err(e) => failures.push((doc.id.clone(), e.to_string())),
        }
    }

    for (id, reason) in &failures {
        eprintln!("failed: {id}: {reason}");
    }
    if ingested == 0 && skipped == 0 {
        return Err(Error::InvalidInput("every document failed ingestion".into()));
    }

    if config.corpus.filter.apply_at_ingest {
        let before = chunks.len();
        chunks = filter_by_taxonomy(
            &chunks,
            &taxonomy,
            config.corpus.filter.min_bm25_score,
            BmParams {
                k1: config.sparse.k1,
                b: config.sparse.b,
            },
        )?;
        println!(
            "taxonomy filter: kept {} of {before} chunks (min score {})",
            chunks.len(),
            config.corpus.filter.min_bm25_score
        );
    }

    jsonl::write_jsonl(&config.paths.chunks, &chunks)?;

    let mut per_domain: BTreeMap<&str, usize> = BTreeMap::new();
    for chunk in &chunks {
        for domain in &chunk.domains {
            *per_domain.entry(domain.as_str()).or_insert(0) += 1;
        }
    }
    println!(
        "ingested {ingested} documents ({} failed, {skipped} skipped), {} chunks -> {}",
        failures.len(),
        chunks.len(),
        config.paths.chunks.display()
    );
    for domain in taxonomy.domains() {
        println!(
            "  {domain}: {} chunks",
            per_domain.get(domain.as_str()).copied().unwrap_or(0)
        );
    }
    Ok(())
}
