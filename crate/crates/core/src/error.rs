use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid cardinality: {0}")]
    InvalidCardinality(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index overflow: {0}")]
    Overflow(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("search budget of {budget} nodes exhausted")]
    BudgetExhausted { budget: u64 },
    #[error("output alphabet too small: Y = {y}, need at least {required}")]
    AlphabetTooSmall { y: usize, required: usize },
    #[error("induced matching too small: found {found}, need {required}")]
    MatchingTooSmall { found: usize, required: usize },
    #[error("no complete bipartite subgraph K_{{{b},{b}}} exists")]
    NotFound { b: usize },
    #[error("degenerate channel: maximum output entropy is zero")]
    DegenerateChannel,
    #[error("schema violation: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
