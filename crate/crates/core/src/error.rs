use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },

    #[error("non-finite value at index {index}")]
    NotFinite { index: usize },

    #[error("node vector must have at least one entry")]
    EmptyVector,

    #[error("node index {index} out of range for {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("round {round} is beyond the sequence horizon {horizon}")]
    HorizonExceeded { round: usize, horizon: usize },

    #[error("graph is not undirected: edge ({from}, {to}) has no reverse")]
    NotUndirected { from: usize, to: usize },

    #[error("matrix fails the weight assumption: {0}")]
    InvalidMatrix(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("vectors have different sums ({left} vs {right})")]
    SumMismatch { left: f64, right: f64 },

    #[error("value {value} at index {index} is not a multiple of 1/{q}")]
    NotQuantized { index: usize, value: f64, q: i64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
