use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the solver, diagnostics and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite sample in {0}")]
    NonFinite(&'static str),

    #[error("margin violation: {0}")]
    MarginViolation(String),

    #[error("domain exhausted: {0}")]
    DomainExhaustion(String),

    #[error("blowup detected at t = {t}: max|z| = {peak:.3e} exceeds cap {cap:.3e}")]
    BlowupDetected { t: f64, peak: f64, cap: f64 },

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("field is not solenoidal: max|div| = {0:.3e}")]
    NotSolenoidal(f64),

    #[error("invalid config:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("malformed field dump {path}: {reason}")]
    Dump { path: PathBuf, reason: String },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error at {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
