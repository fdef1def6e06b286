//! Crate-wide error type.

/// Errors produced anywhere in the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("document {0}: no section text survived cleaning")]
    EmptyAfterCleaning(String),
    #[error("duplicate chunk id: {0}")]
    DuplicateChunkId(String),
    #[error("unknown chunk id: {0}")]
    UnknownChunkId(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("backend error: {0}")]
    Backend(String),
    #[error("judge reply unusable after retries: {0}")]
    JudgeParse(String),
    #[error("token budget {budget} too small: {needed} tokens needed before any evidence")]
    BudgetTooSmall { budget: usize, needed: usize },
    #[error("at least one reference is required")]
    EmptyReference,
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("relevant id set is empty")]
    EmptyRelevantSet,
    #[error("requested {requested} tasks but only {available} available")]
    InsufficientTasks { requested: usize, available: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{failed} of {total} tasks failed, over the failure budget of {budget}")]
    FailureBudgetExceeded {
        failed: usize,
        total: usize,
        budget: f64,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by a remote LLM/embedding backend rather than
    /// local data. Used by callers that map errors to exit codes.
    pub fn is_backend(&self) -> bool {
        matches!(self, Error::Backend(_) | Error::JudgeParse(_))
    }
}
