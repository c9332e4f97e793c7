use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument falls outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The ranking space `l^n` is larger than the configured enumeration guard.
    #[error("ranking space too large: {l}^{n} = {size} exceeds the enumeration guard of {guard}")]
    Capacity {
        n: usize,
        l: usize,
        size: u128,
        guard: u64,
    },

    /// A dataset or ranking file did not parse or failed validation.
    #[error("format error in {}{}: {message}", path.display(), row.map(|r| format!(" (row {r})")).unwrap_or_default())]
    Format {
        path: PathBuf,
        row: Option<usize>,
        message: String,
    },

    /// The chain started from a state with a non-finite log-posterior.
    #[error("non-finite log-posterior at initialization: {term} = {value}")]
    Initialization { term: &'static str, value: f64 },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, row: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            row,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
