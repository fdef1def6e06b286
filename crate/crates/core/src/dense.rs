//! Dense semantic retrieval over a pluggable embedding provider.
//!
//! Search is exact (linear scan over stored vectors) — oracle-equivalent by
//! construction and fast enough at desk scale. The default offline embedder
//! hashes tokens into a fixed number of buckets so every dense-channel test
//! runs without an external service.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::corpus::DocumentChunk;
use crate::error::{Error, Result};
use crate::sparse::{Channel, ScoredHit};
use crate::text;

/// Embedding provider. Implementations must be deterministic for a fixed
/// provider and model identifier, and must emit vectors of `dim()` length.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    /// Identifier recorded in the index so queries cannot mix spaces.
    fn id(&self) -> String;
    /// Embed one text to an L2-normalized vector (all-zero allowed only
    /// when the provider itself returns zeros).
    fn embed(&self, text: &str) -> Result<Vec<f64>>;

    /// Embed many texts; the default loops over [`Embedder::embed`].
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

/// Scale a vector to unit L2 norm; the zero vector stays zero.
pub fn l2_normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

/// Dot product; on pre-normalized vectors this is the cosine similarity.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Full cosine similarity with zero-vector guard.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// Offline test embedder: each token is FNV-hashed (fixed seed) into one of
/// `dim` buckets, counts accumulate, and the vector is L2-normalized.
#[derive(Debug, Clone)]
pub struct HashedBowEmbedder {
    dim: usize,
    seed: u64,
}

impl HashedBowEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        HashedBowEmbedder { dim, seed }
    }
}

impl Default for HashedBowEmbedder {
    fn default() -> Self {
        HashedBowEmbedder { dim: 256, seed: 0 }
    }
}

impl Embedder for HashedBowEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn id(&self) -> String {
        format!("hashed-bow:dim={}:seed={}", self.dim, self.seed)
    }

    fn embed(&self, input: &str) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.dim];
        for token in text::tokenize(input) {
            let bucket = (text::fnv1a64(token.as_bytes(), self.seed) % self.dim as u64) as usize;
            v[bucket] += 1.0;
        }
        Ok(l2_normalize(v))
    }
}

/// Remote embedding provider speaking the batch wire contract:
/// `POST {"model", "input": [...]}` returning
/// `{"data": [{"index", "embedding"}, ...]}` with order restored via `index`.
pub struct RemoteEmbedder {
    endpoint: String,
    model: String,
    dim: usize,
    timeout: Duration,
    max_retries: u32,
    batch_size: usize,
}

impl RemoteEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        dim: usize,
        timeout: Duration,
        max_retries: u32,
    ) -> Self {
        RemoteEmbedder {
            endpoint: endpoint.into(),
            model: model.into(),
            dim,
            timeout,
            max_retries,
            batch_size: 64,
        }
    }

    fn call(&self, inputs: &[&str]) -> Result<Vec<Vec<f64>>> {
        #[derive(Deserialize)]
        struct Reply {
            data: Vec<ReplyRow>,
        }
        #[derive(Deserialize)]
        struct ReplyRow {
            index: usize,
            embedding: Vec<f64>,
        }

        let body = serde_json::json!({ "model": self.model, "input": inputs });
        let mut last_err = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(crate::llm::backoff_delay(attempt));
            }
            let response = ureq::post(&self.endpoint)
                .timeout(self.timeout)
                .send_json(body.clone());
            match response {
                Ok(resp) => {
                    let reply: Reply = resp
                        .into_json()
                        .map_err(|e| Error::Backend(format!("embedding reply malformed: {e}")))?;
                    if reply.data.len() != inputs.len() {
                        return Err(Error::Backend(format!(
                            "embedding reply has {} rows for {} inputs",
                            reply.data.len(),
                            inputs.len()
                        )));
                    }
                    let mut out = vec![Vec::new(); inputs.len()];
                    for row in reply.data {
                        if row.embedding.len() != self.dim {
                            return Err(Error::DimensionMismatch {
                                expected: self.dim,
                                got: row.embedding.len(),
                            });
                        }
                        if row.index >= out.len() {
                            return Err(Error::Backend(format!(
                                "embedding reply index {} out of range",
                                row.index
                            )));
                        }
                        out[row.index] = l2_normalize(row.embedding);
                    }
                    return Ok(out);
                }
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(Error::Backend(format!(
            "embedding request failed after {} retries: {last_err}",
            self.max_retries
        )))
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn id(&self) -> String {
        format!("remote:{}:dim={}", self.model, self.dim)
    }

    fn embed(&self, input: &str) -> Result<Vec<f64>> {
        Ok(self.call(&[input])?.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.batch_size.max(1)) {
            out.extend(self.call(batch)?);
        }
        Ok(out)
    }
}

const FORMAT_VERSION: u32 = 1;

/// Exact-search dense index: one normalized vector per chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndex {
    dim: usize,
    embedder_id: String,
    entries: Vec<(String, Vec<f64>)>,
}

#[derive(Serialize, Deserialize)]
struct DenseIndexFile {
    format_version: u32,
    dim: usize,
    embedder_id: String,
    entries: Vec<DenseEntry>,
}

#[derive(Serialize, Deserialize)]
struct DenseEntry {
    chunk_id: String,
    vector: Vec<f64>,
}

impl DenseIndex {
    /// Embed every chunk and build the index. Embedding errors carry the
    /// offending chunk id.
    pub fn build(chunks: &[DocumentChunk], embedder: &dyn Embedder) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for c in chunks {
            if !seen.insert(c.chunk_id.as_str()) {
                return Err(Error::DuplicateChunkId(c.chunk_id.clone()));
            }
        }

        #[cfg(feature = "parallel")]
        let vec_results: Vec<Result<Vec<f64>>> = chunks
            .par_iter()
            .map(|c| embedder.embed(&c.text))
            .collect();
        #[cfg(not(feature = "parallel"))]
        let vec_results: Vec<Result<Vec<f64>>> =
            chunks.iter().map(|c| embedder.embed(&c.text)).collect();

        let mut entries = Vec::with_capacity(chunks.len());
        for (chunk, vec) in chunks.iter().zip(vec_results) {
            let vec = vec.map_err(|e| {
                Error::Backend(format!("embedding chunk {}: {e}", chunk.chunk_id))
            })?;
            if vec.len() != embedder.dim() {
                return Err(Error::DimensionMismatch {
                    expected: embedder.dim(),
                    got: vec.len(),
                });
            }
            entries.push((chunk.chunk_id.clone(), vec));
        }

        Ok(DenseIndex {
            dim: embedder.dim(),
            embedder_id: embedder.id(),
            entries,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Top-k entries by cosine similarity (dot product of normalized
    /// vectors), descending, ties by ascending chunk id.
    pub fn search(&self, query: &[f64], k: usize) -> Result<Vec<ScoredHit>> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: query.len(),
            });
        }

        #[cfg(feature = "parallel")]
        let iter = self.entries.par_iter();
        #[cfg(not(feature = "parallel"))]
        let iter = self.entries.iter();

        let mut hits: Vec<ScoredHit> = iter
            .map(|(id, vec)| ScoredHit {
                id: id.clone(),
                score: dot(query, vec).clamp(-1.0, 1.0),
                channel: Channel::Dense,
            })
            .collect();
        hits.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.id.cmp(&b.id))
        });
        hits.truncate(k);
        Ok(hits)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = DenseIndexFile {
            format_version: FORMAT_VERSION,
            dim: self.dim,
            embedder_id: self.embedder_id.clone(),
            entries: self
                .entries
                .iter()
                .map(|(chunk_id, vector)| DenseEntry {
                    chunk_id: chunk_id.clone(),
                    vector: vector.clone(),
                })
                .collect(),
        };
        let mut bytes = serde_json::to_vec_pretty(&file)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: DenseIndexFile = serde_json::from_slice(&std::fs::read(path)?)?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported dense index format_version {}",
                file.format_version
            )));
        }
        Ok(DenseIndex {
            dim: file.dim,
            embedder_id: file.embedder_id,
            entries: file
                .entries
                .into_iter()
                .map(|e| (e.chunk_id, e.vector))
                .collect(),
        })
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
    fn embedder_is_deterministic() {
        let e = HashedBowEmbedder::default();
        assert_eq!(e.embed("wheat rust").unwrap(), e.embed("wheat rust").unwrap());
    }

    #[test]
    fn identical_texts_have_cosine_one() {
        let e = HashedBowEmbedder::default();
        let a = e.embed("a").unwrap();
        assert!((dot(&a, &a) - 1.0).abs() < 1e-12);
    }

    // Independent oracle: re-derive the hash-projection from scratch (own
    // FNV-1a, own bucketing and normalization) and compare cosines.
    #[test]
    fn cosine_matches_independent_hash_projection() {
        fn oracle_embed(input: &str, dim: usize) -> Vec<f64> {
            let mut v = vec![0.0f64; dim];
            for tok in input.to_lowercase().split(' ') {
                let mut h: u64 = 0xcbf29ce484222325;
                for b in tok.bytes() {
                    h ^= u64::from(b);
                    h = h.wrapping_mul(0x100000001b3);
                }
                v[(h % dim as u64) as usize] += 1.0;
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        }

        let e = HashedBowEmbedder::new(256, 0);
        let got = dot(
            &e.embed("wheat rust").unwrap(),
            &e.embed("maize yield").unwrap(),
        );
        let want = dot(
            &oracle_embed("wheat rust", 256),
            &oracle_embed("maize yield", 256),
        );
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn empty_corpus_builds_empty_index() {
        let ix = DenseIndex::build(&[], &HashedBowEmbedder::default()).unwrap();
        assert!(ix.is_empty());
    }

    #[test]
    fn rebuild_is_byte_identical() {
        let chunks = vec![chunk("a", "wheat rust"), chunk("b", "maize yield")];
        let e = HashedBowEmbedder::default();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("one.json");
        let p2 = dir.path().join("two.json");
        DenseIndex::build(&chunks, &e).unwrap().save(&p1).unwrap();
        DenseIndex::build(&chunks, &e).unwrap().save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn stored_vector_query_ranks_itself_first() {
        let chunks = vec![
            chunk("a", "wheat rust"),
            chunk("b", "maize yield"),
            chunk("c", "irrigation pumps"),
        ];
        let e = HashedBowEmbedder::default();
        let ix = DenseIndex::build(&chunks, &e).unwrap();
        let q = e.embed("maize yield").unwrap();
        let hits = ix.search(&q, 3).unwrap();
        assert_eq!(hits[0].id, "b");
        assert!((hits[0].score - 1.0).abs() < 1e-6);
        assert_eq!(hits[0].channel, Channel::Dense);
    }

    #[test]
    fn orthogonal_query_scores_zero() {
        // Hand-built vectors on disjoint buckets.
        let ix = DenseIndex {
            dim: 4,
            embedder_id: "unit-test".into(),
            entries: vec![("a".into(), vec![1.0, 0.0, 0.0, 0.0])],
        };
        let hits = ix.search(&[0.0, 1.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(hits[0].score, 0.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let ix = DenseIndex::build(&[chunk("a", "x")], &HashedBowEmbedder::default()).unwrap();
        assert!(matches!(
            ix.search(&[0.0; 8], 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn search_matches_brute_force_on_random_index() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let dim = 16;
        let entries: Vec<(String, Vec<f64>)> = (0..200)
            .map(|i| {
                let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                (format!("e{i:03}"), l2_normalize(v))
            })
            .collect();
        let ix = DenseIndex {
            dim,
            embedder_id: "unit-test".into(),
            entries: entries.clone(),
        };
        let q = l2_normalize((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect());

        let mut oracle: Vec<(String, f64)> = entries
            .iter()
            .map(|(id, v)| (id.clone(), dot(&q, v)))
            .collect();
        oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));

        let got: Vec<String> = ix.search(&q, 10).unwrap().into_iter().map(|h| h.id).collect();
        let want: Vec<String> = oracle.iter().take(10).map(|(id, _)| id.clone()).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn cosine_is_symmetric() {
        let e = HashedBowEmbedder::default();
        let a = e.embed("nitrogen uptake in wheat").unwrap();
        let b = e.embed("phosphorus in maize soils").unwrap();
        assert!((dot(&a, &b) - dot(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn save_load_round_trips_search_results() {
        let chunks = vec![chunk("a", "wheat rust"), chunk("b", "maize yield")];
        let e = HashedBowEmbedder::default();
        let ix = DenseIndex::build(&chunks, &e).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dense.json");
        ix.save(&path).unwrap();
        let loaded = DenseIndex::load(&path).unwrap();
        let q = e.embed("rust on wheat leaves").unwrap();
        assert_eq!(ix.search(&q, 2).unwrap(), loaded.search(&q, 2).unwrap());
        assert_eq!(ix.embedder_id(), loaded.embedder_id());
    }

    // Wire contract: request carries {"model", "input": [...]}, and the
    // reply rows map back through their "index" field even out of order.
    #[test]
    fn remote_embedder_restores_reply_order_via_index() {
        use crate::testsupport::canned_server;
        let reply = r#"{"data":[
            {"index": 1, "embedding": [0.0, 2.0, 0.0]},
            {"index": 0, "embedding": [3.0, 0.0, 0.0]}
        ]}"#;
        let (endpoint, rx) = canned_server(vec![(200, reply.to_string())]);
        let embedder = RemoteEmbedder::new(
            endpoint,
            "embed-model",
            3,
            std::time::Duration::from_secs(2),
            0,
        );
        let out = embedder.embed_batch(&["first text", "second text"]).unwrap();
        assert_eq!(out[0], vec![1.0, 0.0, 0.0], "row index 0 is the first input");
        assert_eq!(out[1], vec![0.0, 1.0, 0.0]);

        let sent: serde_json::Value = serde_json::from_str(&rx.recv().unwrap()).unwrap();
        assert_eq!(sent["model"], "embed-model");
        assert_eq!(sent["input"][0], "first text");
        assert_eq!(sent["input"][1], "second text");
    }

    #[test]
    fn remote_embedder_rejects_wrong_dimension() {
        use crate::testsupport::canned_server;
        let reply = r#"{"data":[{"index": 0, "embedding": [1.0, 0.0]}]}"#;
        let (endpoint, _rx) = canned_server(vec![(200, reply.to_string())]);
        let embedder = RemoteEmbedder::new(
            endpoint,
            "embed-model",
            3,
            std::time::Duration::from_secs(2),
            0,
        );
        assert!(matches!(
            embedder.embed("text"),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn remote_embedder_retries_then_errors() {
        use crate::testsupport::canned_server;
        let (endpoint, _rx) = canned_server(vec![(500, "{}".into()), (500, "{}".into())]);
        let embedder = RemoteEmbedder::new(
            endpoint,
            "embed-model",
            3,
            std::time::Duration::from_secs(2),
            1,
        );
        let err = embedder.embed("text").unwrap_err();
        assert!(matches!(err, Error::Backend(_)), "{err}");
    }
}
