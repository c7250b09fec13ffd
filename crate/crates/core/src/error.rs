use thiserror::Error;

/// Errors surfaced by the co-design pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A graph or configuration violates a structural invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// An argument is outside its permitted range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A lookup failed (unknown digest, preset, or table entry).
    #[error("lookup error: {0}")]
    Lookup(String),

    /// A CNN block has no hardware mapping.
    #[error("unmappable block: {0}")]
    Unmappable(String),

    /// A tile cannot fit on-chip even at minimum tiling.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// No design-space point satisfies the given constraints.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A data file failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// An evaluation failed and could not be retried.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
