use thiserror::Error;

#[derive(Debug, Error)]
pub enum NsbmError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("block matrix entry out of range: {0}")]
    BlockRange(String),

    #[error("problem too large for exhaustive enumeration: n = {n} exceeds limit {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("singular information matrix")]
    SingularInformation,

    #[error("eigendecomposition failed")]
    Eigen,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("degenerate graph: {0}")]
    DegenerateGraph(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NsbmError>;
