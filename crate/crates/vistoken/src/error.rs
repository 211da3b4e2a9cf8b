use std::path::PathBuf;

/// Errors produced by the selection pipeline, the verification suite and the
/// file formats.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty score vector")]
    EmptyScores,

    #[error("attention mass must be non-negative (index {index}: {value})")]
    NegativeAttention { index: usize, value: f64 },

    #[error("non-finite value {value} at flat index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("value {value} at index {index} violates the {tag} range")]
    OutOfRange {
        index: usize,
        value: f64,
        tag: &'static str,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("no text tokens")]
    NoTextTokens,

    #[error("no focus mass")]
    NoFocusMass,

    #[error("retained set is empty but {pruned} tokens were pruned")]
    EmptyRetained { pruned: usize },

    #[error("oracle size cap exceeded: {len} candidates (max {max})")]
    OracleCap { len: usize, max: usize },

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("unsupported rank {0}")]
    UnsupportedRank(u8),

    #[error("infeasible fixture: {0}")]
    Fixture(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
