use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dictionary column {0} has zero norm and cannot be normalized")]
    ZeroAtom(usize),

    #[error("input vector is zero; normalized noise variance is undefined")]
    ZeroInput,

    #[error("input vector is not unit norm (norm {0})")]
    NotUnitNorm(f64),

    #[error("ground-truth channel is zero")]
    ZeroChannel,

    #[error("support matrix is rank deficient when adding atom {0}")]
    RankDeficient(usize),

    #[error("forward trace does not match the current weights (replay deviation {0:e})")]
    StaleTrace(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
