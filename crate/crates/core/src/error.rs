use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// The variants are grouped so that a front end can map them onto a small
/// set of exit statuses: argument problems, I/O problems, numerical
/// failures, and unsupported bond dimensions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("matrix is not an isometry (deviation {0:.3e})")]
    NotIsometry(f64),

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("bond dimension {found} exceeds the supported maximum {max}")]
    BondTooLarge { found: usize, max: usize },

    #[error("{what}: size {n} exceeds the cap {cap}")]
    TooLarge { what: &'static str, n: usize, cap: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("non-finite objective or gradient at iterate {step}: {detail}")]
    NonFinite { step: usize, detail: String },

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document: {0}")]
    Format(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
