//! Shared error type for the toolkit.
//!
//! Variants are grouped by how the CLI maps them to exit codes: backend
//! failures (missing measurements, failed external commands) exit with 2,
//! everything else that is user-correctable exits with 1.

use crate::model::Resolution;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },

    #[error("duplicate measurement for ({sequence}, {resolution}, qp={qp})")]
    DuplicateRecord {
        sequence: String,
        resolution: Resolution,
        qp: i32,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing measurement for ({sequence}, {resolution}, qp={qp})")]
    MissingMeasurement {
        sequence: String,
        resolution: Resolution,
        qp: i32,
    },

    #[error("encode backend failure: {0}")]
    Backend(String),

    #[error("evaluation outside the fitted domain: x={x}, domain [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },

    #[error("rate spans do not overlap: [{a_lo:.4}, {a_hi:.4}] vs [{b_lo:.4}, {b_hi:.4}]")]
    NoOverlap {
        a_lo: f64,
        a_hi: f64,
        b_lo: f64,
        b_hi: f64,
    },

    #[error("no knee detected: {0}")]
    NoKnee(String),

    #[error("numerical conditioning failure: {0}")]
    Conditioning(String),

    #[error("{0}")]
    Other(String),
}

impl Error {
    /// True for failures of the encode backend itself (exit code 2 in the CLI).
    pub fn is_backend(&self) -> bool {
        matches!(
            self,
            Error::Backend(_) | Error::MissingMeasurement { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
