use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node count must be at least 1")]
    EmptyGraph,

    #[error("node index {index} out of range for graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("expected {expected} coefficients, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("expected {expected} basis, got {got}")]
    WrongBasis { expected: &'static str, got: &'static str },

    #[error("expected {expected} operator, got {got}")]
    WrongOperatorKind { expected: &'static str, got: &'static str },

    #[error("parameter {name} = {value} outside of {range}")]
    OutOfRange { name: &'static str, value: f64, range: &'static str },

    #[error("matrix is not symmetric (max deviation {0:e})")]
    Asymmetric(f64),

    #[error("matrix size {n} exceeds dense limit {limit}")]
    OverDenseLimit { n: usize, limit: usize },

    #[error("empty mask")]
    EmptyMask,

    #[error("every node is isolated")]
    AllIsolated,

    #[error("loss is not a scalar (shape {rows}x{cols})")]
    NonScalarLoss { rows: usize, cols: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("non-finite loss at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
