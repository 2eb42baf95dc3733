use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A tensor or signal dimension did not match what an operation requires.
    /// `axis` names the offending axis.
    #[error("dimension error on axis `{axis}`: {detail}")]
    Dimension { axis: &'static str, detail: String },

    /// Invalid argument or configuration.
    #[error("validation error: {0}")]
    Validation(String),

    /// A NaN or infinity was produced where finite values are required.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Diverged {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed container file (.wts/.melz/.utiz/WAV/manifest).
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub fn dimension(axis: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            axis,
            detail: detail.into(),
        }
    }

    pub fn validation(detail: impl Into<String>) -> Self {
        Error::Validation(detail.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
