//! Three-channel retrieval-augmented generation engine.
//!
//! The crate is organized around three retrieval channels over a shared
//! chunked corpus — a BM25 inverted index ([`sparse`]), an exact cosine
//! index over pluggable embeddings ([`dense`]), and a knowledge graph with
//! multi-hop path search ([`graph`]) — whose results are merged by weighted
//! score fusion with MMR diversity re-ranking ([`fusion`]) and handed to a
//! chat backend for grounded generation ([`engine`], [`prompt`]).
//!
//! Around the retrieval core sit an instruction [`data_engine`] (three
//! sourcing pipelines plus a four-agent refinement chain), automatic text
//! [`metrics`] (BLEU, METEOR-style, ROUGE), an LLM-as-judge harness
//! ([`judge`]), and a [`benchmark`] runner. Every LLM role speaks one wire
//! contract ([`llm`]) so the whole stack is testable offline with scripted
//! backends.

pub mod benchmark;
pub mod config;
pub mod corpus;
pub mod data_engine;
pub mod dense;
pub mod engine;
pub mod error;
pub mod fusion;
pub mod graph;
pub mod jsonl;
pub mod judge;
pub mod llm;
pub mod metrics;
pub mod prompt;
pub mod sparse;
pub mod text;

#[cfg(test)]
pub(crate) mod testsupport;

pub use error::{Error, Result};
