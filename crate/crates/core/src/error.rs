use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group: {0}")]
    InvalidGroup(String),

    #[error("dimension mismatch: expected {expected} components, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("group of order {order} is too large for an exhaustive transform (limit {limit})")]
    GroupTooLarge { order: u64, limit: u64 },

    #[error("group {0} has a component that is not a power of two")]
    NotSftCapable(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("empty table")]
    EmptyTable,

    #[error("{live} live cosets at level {level} exceed the node cap of {cap}")]
    NodeCapExceeded { level: usize, live: usize, cap: usize },

    #[error("no candidates: {0}")]
    NoCandidates(String),

    #[error("{0} is not invertible modulo {1}")]
    NotInvertible(u64, u64),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
