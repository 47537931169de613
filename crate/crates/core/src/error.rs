use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("loss must be a scalar, got shape {0:?}")]
    NotScalar(Vec<usize>),

    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },

    #[error("{what} index {index} out of range (valid: 0..={max})")]
    IndexOutOfRange { what: &'static str, index: usize, max: usize },

    #[error("scaling constraint violated: alpha*beta^2*gamma^2 = {value} is outside [{lo}, {hi}]")]
    ScalingConstraint { value: f64, lo: f64, hi: f64 },

    #[error("resolution mismatch: model expects {expected}x{expected}, image is {height}x{width}")]
    ResolutionMismatch { expected: usize, height: usize, width: usize },

    #[error("architecture error: {0}")]
    Architecture(String),

    #[error("identity check failed: {0}")]
    Identity(String),

    #[error("malformed {format} data: {detail}")]
    Format { format: &'static str, detail: String },

    #[error("truncated {format} payload: expected {expected} bytes, found {actual}")]
    Truncated { format: &'static str, expected: usize, actual: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch { op, detail: detail.into() }
    }

    pub(crate) fn format(format: &'static str, detail: impl Into<String>) -> Self {
        Error::Format { format, detail: detail.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
