use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("file too short: {what} needs {expected} bytes, found {found}")]
    Length {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("inconsistent data: {0}")]
    Consistency(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical domain error in {what}: value {value}")]
    NumericalDomain { what: String, value: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
