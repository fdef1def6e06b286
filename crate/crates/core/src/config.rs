//! Engine configuration: one JSON file, validated on load, with every
//! default stated explicitly and `ENGINE_`-prefixed environment overrides
//! (double underscore as the path separator, e.g. `ENGINE_SPARSE__K1=1.4`).

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::{ChunkConfig, CleaningConfig};
use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::llm::{ChatBackend, EchoBackend, HttpChatBackend, Limiter, ScriptedBackend};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub paths: PathsConfig,
    pub corpus: CorpusConfig,
    pub sparse: SparseConfig,
    pub dense: DenseConfig,
    pub graph: GraphConfig,
    pub fusion: FusionConfig,
    pub generation: GenerationConfig,
    pub engine: EngineSection,
    pub data_engine: DataEngineConfig,
    /// RNG seed for every randomized step.
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub taxonomy: PathBuf,
    pub chunks: PathBuf,
    pub sparse_index: PathBuf,
    pub dense_index: PathBuf,
    pub graph: PathBuf,
    pub triples: PathBuf,
    /// Optional directory of prompt template overrides.
    pub templates: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            taxonomy: "taxonomy.json".into(),
            chunks: "artifacts/chunks.jsonl".into(),
            sparse_index: "artifacts/sparse.json".into(),
            dense_index: "artifacts/dense.json".into(),
            graph: "artifacts/graph.json".into(),
            triples: "artifacts/triples.jsonl".into(),
            templates: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub cleaning: CleaningConfig,
    pub chunking: ChunkConfig,
    pub filter: TaxonomyFilterConfig,
}

/// BM25 relevance filter applied against per-domain keyword queries.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomyFilterConfig {
    /// Apply the filter during ingestion (off by default; the distillation
    /// pipeline applies it regardless when configured).
    pub apply_at_ingest: bool,
    pub min_bm25_score: f64,
}

impl Default for TaxonomyFilterConfig {
    fn default() -> Self {
        TaxonomyFilterConfig {
            apply_at_ingest: false,
            min_bm25_score: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseConfig {
    pub enabled: bool,
    pub k1: f64,
    pub b: f64,
    pub stopwords: Vec<String>,
}

impl Default for SparseConfig {
    fn default() -> Self {
        SparseConfig {
            enabled: true,
            k1: 1.2,
            b: 0.75,
            stopwords: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    HashedBow,
    Remote,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseConfig {
    pub enabled: bool,
    pub embedder: EmbedderKind,
    pub dim: usize,
    /// Hash seed for the offline embedder.
    pub hash_seed: u64,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub timeout_ms: u64,
    pub max_retries: u32,
}

impl Default for DenseConfig {
    fn default() -> Self {
        DenseConfig {
            enabled: true,
            embedder: EmbedderKind::HashedBow,
            dim: 256,
            hash_seed: 0,
            endpoint: None,
            model: None,
            timeout_ms: 30_000,
            max_retries: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    Pattern,
    Llm,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub enabled: bool,
    pub max_hops: usize,
    pub decay: f64,
    /// Also materialize tail->head edges (relation prefixed "inverse ").
    pub reverse_edges: bool,
    pub extractor: ExtractorKind,
    /// Closed verb list for the pattern extractor.
    pub verbs: Vec<String>,
    pub pattern_confidence: f64,
    /// Entity links taken from a query.
    pub max_links: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            enabled: true,
            max_hops: 2,
            decay: 0.7,
            reverse_edges: false,
            extractor: ExtractorKind::Pattern,
            verbs: crate::graph::DEFAULT_VERBS.iter().map(|s| s.to_string()).collect(),
            pattern_confidence: 0.9,
            max_links: 8,
        }
    }
}

/// Which LLM roles exist; each binds its own backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LlmRole {
    Generator,
    Judge,
    Agent,
    Extractor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Echo,
    Scripted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleBackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: usize,
    pub timeout_ms: u64,
    pub max_retries: u32,
    /// Script file for `kind = "scripted"`.
    pub script: Option<PathBuf>,
}

impl RoleBackendConfig {
    fn defaults(model: &str, temperature: f64) -> Self {
        RoleBackendConfig {
            kind: BackendKind::Echo,
            endpoint: None,
            model: model.into(),
            temperature,
            max_tokens: 1024,
            timeout_ms: 30_000,
            max_retries: 3,
            script: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolesConfig {
    pub generator: RoleBackendConfig,
    pub judge: RoleBackendConfig,
    pub agent: RoleBackendConfig,
    pub extractor: RoleBackendConfig,
}

impl Default for RolesConfig {
    fn default() -> Self {
        // Deterministic roles run cold; generative roles keep diversity.
        RolesConfig {
            generator: RoleBackendConfig::defaults("generator", 0.7),
            judge: RoleBackendConfig::defaults("judge", 0.0),
            agent: RoleBackendConfig::defaults("agent", 0.7),
            extractor: RoleBackendConfig::defaults("extractor", 0.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    pub budget_tokens: usize,
    pub roles: RolesConfig,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            budget_tokens: 3072,
            roles: RolesConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    /// Cap on concurrent LLM requests engine-wide.
    pub max_inflight_llm: usize,
    /// Benchmark runs fail above this fraction of per-task errors.
    pub failure_budget: f64,
}

impl Default for EngineSection {
    fn default() -> Self {
        EngineSection {
            max_inflight_llm: 4,
            failure_budget: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataEngineConfig {
    pub accept_quality: f64,
    pub answer_min_tokens: usize,
    pub answer_max_tokens: usize,
    pub dedup_threshold: f64,
    pub leakage_threshold: f64,
    pub promote_fraction: f64,
    pub seed_capacity: usize,
    pub generate_rounds: usize,
    pub generate_per_round: usize,
}

impl Default for DataEngineConfig {
    fn default() -> Self {
        DataEngineConfig {
            accept_quality: 0.75,
            answer_min_tokens: 10,
            answer_max_tokens: 4096,
            dedup_threshold: 0.8,
            leakage_threshold: 0.8,
            promote_fraction: 0.05,
            seed_capacity: 2000,
            generate_rounds: 1,
            generate_per_round: 8,
        }
    }
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            paths: PathsConfig::default(),
            corpus: CorpusConfig::default(),
            sparse: SparseConfig::default(),
            dense: DenseConfig::default(),
            graph: GraphConfig::default(),
            fusion: FusionConfig::default(),
            generation: GenerationConfig::default(),
            engine: EngineSection::default(),
            data_engine: DataEngineConfig::default(),
            seed: 0,
        }
    }
}

/// Apply `ENGINE_`-prefixed environment overrides onto the raw config JSON.
/// Variable names map to paths with `__` separating segments; values parse
/// as JSON scalars, falling back to strings.
fn apply_env_overrides(
    value: &mut serde_json::Value,
    vars: impl Iterator<Item = (String, String)>,
) {
    for (key, raw) in vars {
        let Some(path) = key.strip_prefix("ENGINE_") else {
            continue;
        };
        let segments: Vec<String> = path.split("__").map(str::to_lowercase).collect();
        if segments.iter().any(String::is_empty) {
            continue;
        }
        let parsed: serde_json::Value = serde_json::from_str(&raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.clone()));
        let mut cursor = &mut *value;
        for (i, segment) in segments.iter().enumerate() {
            let map = match cursor.as_object_mut() {
                Some(map) => map,
                None => break,
            };
            if i + 1 == segments.len() {
                map.insert(segment.clone(), parsed);
                break;
            }
            cursor = map
                .entry(segment.clone())
                .or_insert_with(|| serde_json::Value::Object(Default::default()));
        }
    }
}

impl EngineConfig {
    /// Pretty JSON with every default explicit.
    pub fn default_json() -> String {
        let mut out =
            serde_json::to_string_pretty(&EngineConfig::default()).expect("config serializes");
        out.push('\n');
        out
    }

    /// Load from a JSON file, apply `ENGINE_` environment overrides,
    /// reject unknown keys, and validate.
    pub fn load(path: &Path) -> Result<Self> {
        let mut raw: serde_json::Value = serde_json::from_slice(&std::fs::read(path).map_err(
            |e| Error::InvalidInput(format!("config {}: {e}", path.display())),
        )?)?;
        apply_env_overrides(&mut raw, std::env::vars());
        let config: EngineConfig = serde_json::from_value(raw)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus.chunking.validate()?;
        self.fusion.validate()?;
        if self.sparse.k1 < 0.0 || !(0.0..=1.0).contains(&self.sparse.b) {
            return Err(Error::Config(format!(
                "sparse params out of range: k1={}, b={}",
                self.sparse.k1, self.sparse.b
            )));
        }
        if self.dense.dim == 0 {
            return Err(Error::Config("dense dim must be >= 1".into()));
        }
        if self.dense.embedder == EmbedderKind::Remote
            && (self.dense.endpoint.is_none() || self.dense.model.is_none())
        {
            return Err(Error::Config(
                "remote embedder needs endpoint and model".into(),
            ));
        }
        if !(1..=3).contains(&self.graph.max_hops) {
            return Err(Error::Config(format!(
                "graph max_hops must be in 1..=3, got {}",
                self.graph.max_hops
            )));
        }
        if !(self.graph.decay > 0.0 && self.graph.decay <= 1.0) {
            return Err(Error::Config(format!(
                "graph decay must be in (0, 1], got {}",
                self.graph.decay
            )));
        }
        if self.graph.max_links == 0 {
            return Err(Error::Config("graph max_links must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.graph.pattern_confidence) {
            return Err(Error::Config("pattern_confidence must be in [0, 1]".into()));
        }
        if self.generation.budget_tokens < 128 {
            return Err(Error::Config(format!(
                "budget_tokens must be >= 128, got {}",
                self.generation.budget_tokens
            )));
        }
        for (name, role) in [
            ("generator", &self.generation.roles.generator),
            ("judge", &self.generation.roles.judge),
            ("agent", &self.generation.roles.agent),
            ("extractor", &self.generation.roles.extractor),
        ] {
            if role.temperature < 0.0 {
                return Err(Error::Config(format!("{name}: temperature must be >= 0")));
            }
            if role.kind == BackendKind::Http && role.endpoint.is_none() {
                return Err(Error::Config(format!("{name}: http backend needs an endpoint")));
            }
            if role.kind == BackendKind::Scripted && role.script.is_none() {
                return Err(Error::Config(format!("{name}: scripted backend needs a script")));
            }
        }
        if self.engine.max_inflight_llm == 0 {
            return Err(Error::Config("max_inflight_llm must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.engine.failure_budget) {
            return Err(Error::Config("failure_budget must be in [0, 1]".into()));
        }
        let de = &self.data_engine;
        for (name, v) in [
            ("accept_quality", de.accept_quality),
            ("dedup_threshold", de.dedup_threshold),
            ("leakage_threshold", de.leakage_threshold),
            ("promote_fraction", de.promote_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("data_engine.{name} must be in [0, 1]")));
            }
        }
        if de.answer_min_tokens > de.answer_max_tokens {
            return Err(Error::Config(
                "data_engine answer token bounds are inverted".into(),
            ));
        }
        if self.corpus.filter.min_bm25_score < 0.0 {
            return Err(Error::Config("filter.min_bm25_score must be >= 0".into()));
        }
        Ok(())
    }

    pub fn role(&self, role: LlmRole) -> &RoleBackendConfig {
        match role {
            LlmRole::Generator => &self.generation.roles.generator,
            LlmRole::Judge => &self.generation.roles.judge,
            LlmRole::Agent => &self.generation.roles.agent,
            LlmRole::Extractor => &self.generation.roles.extractor,
        }
    }

    /// Build the chat backend bound to a role.
    pub fn build_backend(
        &self,
        role: LlmRole,
        limiter: Arc<Limiter>,
    ) -> Result<Box<dyn ChatBackend>> {
        let cfg = self.role(role);
        match cfg.kind {
            BackendKind::Echo => Ok(Box::new(EchoBackend)),
            BackendKind::Scripted => {
                let path = cfg.script.as_ref().ok_or_else(|| {
                    Error::Config("scripted backend needs a script path".into())
                })?;
                Ok(Box::new(ScriptedBackend::from_file(&cfg.model, path)?))
            }
            BackendKind::Http => {
                let endpoint = cfg.endpoint.as_ref().ok_or_else(|| {
                    Error::Config("http backend needs an endpoint".into())
                })?;
                Ok(Box::new(
                    HttpChatBackend::new(
                        endpoint.clone(),
                        cfg.model.clone(),
                        cfg.temperature,
                        cfg.max_tokens,
                        Duration::from_millis(cfg.timeout_ms),
                        cfg.max_retries,
                    )
                    .with_limiter(limiter),
                ))
            }
        }
    }

    /// Build the configured embedder.
    pub fn build_embedder(&self) -> Result<Box<dyn crate::dense::Embedder>> {
        match self.dense.embedder {
            EmbedderKind::HashedBow => Ok(Box::new(crate::dense::HashedBowEmbedder::new(
                self.dense.dim,
                self.dense.hash_seed,
            ))),
            EmbedderKind::Remote => {
                let endpoint = self.dense.endpoint.clone().ok_or_else(|| {
                    Error::Config("remote embedder needs an endpoint".into())
                })?;
                let model = self.dense.model.clone().ok_or_else(|| {
                    Error::Config("remote embedder needs a model".into())
                })?;
                Ok(Box::new(crate::dense::RemoteEmbedder::new(
                    endpoint,
                    model,
                    self.dense.dim,
                    Duration::from_millis(self.dense.timeout_ms),
                    self.dense.max_retries,
                )))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_and_validates() {
        let json = EngineConfig::default_json();
        let parsed: EngineConfig = serde_json::from_str(&json).unwrap();
        parsed.validate().unwrap();
        // Spot-check that stated defaults appear explicitly.
        assert!(json.contains("\"k1\": 1.2"));
        assert!(json.contains("\"b\": 0.75"));
        assert!(json.contains("\"max_chunk_tokens\": 512"));
        assert!(json.contains("\"overlap_tokens\": 64"));
        assert!(json.contains("\"dim\": 256"));
        assert!(json.contains("\"max_hops\": 2"));
        assert!(json.contains("\"lambda\": 0.7"));
        assert!(json.contains("\"top_n\": 8"));
        assert!(json.contains("\"dedup_jaccard\": 0.9"));
        assert!(json.contains("\"budget_tokens\": 3072"));
        assert!(json.contains("\"accept_quality\": 0.75"));
        assert!(json.contains("\"max_inflight_llm\": 4"));
        assert!(json.contains("\"min_bm25_score\": 1.0"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut value: serde_json::Value =
            serde_json::from_str(&EngineConfig::default_json()).unwrap();
        value["sparse"]["bogus"] = serde_json::json!(1);
        let err = serde_json::from_value::<EngineConfig>(value).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn env_overrides_reach_nested_fields() {
        let mut value: serde_json::Value =
            serde_json::from_str(&EngineConfig::default_json()).unwrap();
        apply_env_overrides(
            &mut value,
            vec![
                ("ENGINE_SPARSE__K1".to_string(), "1.6".to_string()),
                ("ENGINE_GRAPH__MAX_HOPS".to_string(), "1".to_string()),
                (
                    "ENGINE_PATHS__TAXONOMY".to_string(),
                    "other/tax.json".to_string(),
                ),
                ("UNRELATED".to_string(), "x".to_string()),
            ]
            .into_iter(),
        );
        let config: EngineConfig = serde_json::from_value(value).unwrap();
        assert_eq!(config.sparse.k1, 1.6);
        assert_eq!(config.graph.max_hops, 1);
        assert_eq!(config.paths.taxonomy, PathBuf::from("other/tax.json"));
        config.validate().unwrap();
    }

    #[test]
    fn invalid_values_fail_validation() {
        let mut config = EngineConfig::default();
        config.graph.max_hops = 5;
        assert!(config.validate().is_err());

        let mut config = EngineConfig::default();
        config.fusion.w_dense = 0.9;
        assert!(config.validate().is_err());

        let mut config = EngineConfig::default();
        config.generation.budget_tokens = 10;
        assert!(config.validate().is_err());

        let mut config = EngineConfig::default();
        config.generation.roles.generator.kind = BackendKind::Http;
        assert!(config.validate().is_err());
    }
}
