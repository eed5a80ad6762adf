use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension limit exceeded: {n} qubits, limit {limit}")]
    DimensionLimit { n: usize, limit: usize },

    #[error("non-Hermitian term: {0}")]
    NonHermitian(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-symmetric term: {0}")]
    NotSymmetric(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("at s = {s}: {source}")]
    AtParameter { s: f64, source: Box<Error> },

    #[error("norm drift {drift:e} exceeds {limit:e} at s = {s}")]
    NormDrift { drift: f64, limit: f64, s: f64 },

    #[error("vanishing gap {gap:e} at s = {s}")]
    VanishingGap { gap: f64, s: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at(self, s: f64) -> Error {
        Error::AtParameter { s, source: Box::new(self) }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Error {
        Error::InvalidParameter(msg.into())
    }
}
