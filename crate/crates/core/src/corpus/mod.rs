//! Corpus ingestion: document cleaning, chunking, and taxonomy labeling.

mod chunk;
mod classify;
mod clean;

pub use chunk::{chunk_document, ChunkConfig};
pub use classify::{classify_chunk, filter_by_taxonomy};
pub use clean::{parse_document, serialize_document, CleaningConfig};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a raw document came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Paper,
    Book,
    QaDataset,
    Other,
}

/// An unprocessed input document (markdown-like text).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub source: Source,
    pub title: String,
    pub body: String,
}

impl RawDocument {
    /// Id must be non-empty; only QA-dataset records may have an empty body.
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::InvalidInput("document id is empty".into()));
        }
        if self.body.trim().is_empty() && self.source != Source::QaDataset {
            return Err(Error::InvalidInput(format!(
                "document {}: empty body is only allowed for qa_dataset sources",
                self.id
            )));
        }
        Ok(())
    }
}

/// One heading-delimited section of a cleaned document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub text: String,
}

/// A document after noise removal and structure parsing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanDocument {
    pub id: String,
    pub title: String,
    pub sections: Vec<Section>,
}

/// One whole-word keyword match `(keyword, count)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordHit(pub String, pub usize);

/// The unit of indexing and retrieval: a cleaned, taxonomy-labeled passage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentChunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub text: String,
    pub token_count: usize,
    pub domains: Vec<String>,
    pub keyword_hits: Vec<KeywordHit>,
}

/// The nine thematic domains, in canonical order.
pub const CANONICAL_DOMAINS: [&str; 9] = [
    "Fundamental Agri Knowledge",
    "Pest and Disease Management",
    "Agroecology and Natural Resources",
    "Agri Technology and Engineering",
    "Smart Agri, AI & Computing",
    "Agri Economics",
    "Meteorology, Remote Sensing",
    "Agricultural Policy and Governance",
    "Life, Culture and Rural Studies",
];

/// Domain/keyword taxonomy guiding chunk labeling and relevance filtering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    domains: Vec<String>,
    /// domain -> lowercase keywords.
    keywords: BTreeMap<String, Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct TaxonomyFile {
    domains: Vec<TaxonomyDomain>,
}

#[derive(Serialize, Deserialize)]
struct TaxonomyDomain {
    name: String,
    keywords: Vec<String>,
}

impl Taxonomy {
    /// Build a taxonomy. Keywords are lowercased; a keyword may belong to
    /// only one domain.
    pub fn new(entries: Vec<(String, Vec<String>)>) -> Result<Self> {
        let mut domains = Vec::new();
        let mut keywords = BTreeMap::new();
        let mut seen = std::collections::HashSet::new();
        for (name, kws) in entries {
            if keywords.contains_key(&name) {
                return Err(Error::InvalidInput(format!("duplicate domain {name}")));
            }
            let mut normalized = Vec::new();
            for kw in kws {
                let kw = kw.trim().to_lowercase();
                if kw.is_empty() {
                    return Err(Error::InvalidInput(format!("empty keyword in {name}")));
                }
                if !seen.insert(kw.clone()) {
                    return Err(Error::InvalidInput(format!(
                        "keyword {kw:?} appears in more than one domain"
                    )));
                }
                normalized.push(kw);
            }
            keywords.insert(name.clone(), normalized);
            domains.push(name);
        }
        Ok(Taxonomy { domains, keywords })
    }

    /// Load from the taxonomy JSON file and require the canonical nine
    /// domains (any order in the file; stored in canonical order).
    pub fn load(path: &Path) -> Result<Self> {
        let file: TaxonomyFile = serde_json::from_slice(&std::fs::read(path)?)?;
        let tax = Taxonomy::new(
            file.domains
                .into_iter()
                .map(|d| (d.name, d.keywords))
                .collect(),
        )?;
        if tax.domains.len() != 9 {
            return Err(Error::InvalidInput(format!(
                "taxonomy must have exactly 9 domains, found {}",
                tax.domains.len()
            )));
        }
        for name in CANONICAL_DOMAINS {
            if !tax.keywords.contains_key(name) {
                return Err(Error::InvalidInput(format!(
                    "taxonomy is missing canonical domain {name:?}"
                )));
            }
        }
        // Reorder to canonical.
        let keywords = tax.keywords;
        let domains: Vec<String> = CANONICAL_DOMAINS.iter().map(|s| s.to_string()).collect();
        Ok(Taxonomy { domains, keywords })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = TaxonomyFile {
            domains: self
                .domains
                .iter()
                .map(|name| TaxonomyDomain {
                    name: name.clone(),
                    keywords: self.keywords[name].clone(),
                })
                .collect(),
        };
        let mut bytes = serde_json::to_vec_pretty(&file)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn domains(&self) -> &[String] {
        &self.domains
    }

    pub fn keywords(&self, domain: &str) -> &[String] {
        self.keywords.get(domain).map_or(&[], Vec::as_slice)
    }

    pub fn keyword_count(&self) -> usize {
        self.keywords.values().map(Vec::len).sum()
    }
}
