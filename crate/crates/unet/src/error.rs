use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("channel mismatch in {op}: expected {expected}, got {got}")]
    ChannelMismatch { op: &'static str, expected: usize, got: usize },

    #[error("spatial dims {dims:?} are not divisible by {by}")]
    IndivisibleDims { dims: [usize; 3], by: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("weight mismatch at layer `{layer}`: {reason}")]
    WeightMismatch { layer: String, reason: String },

    #[error("invalid weight file {}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Core(#[from] cardiorefine_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format { path: path.into(), reason: reason.into() }
    }

    pub(crate) fn mismatch(layer: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::WeightMismatch { layer: layer.into(), reason: reason.into() }
    }
}
