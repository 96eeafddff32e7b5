use thiserror::Error;

/// Errors produced by model construction, evaluation, parsing and the drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("example has {got} attributes, model expects {expected}")]
    InputShape { expected: usize, got: usize },

    #[error("tree has no leaf with id {0}")]
    UnknownLeaf(usize),

    #[error("attribute count mismatch: {0} vs {1}")]
    AttributeMismatch(usize, usize),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("unsupported model version {0}")]
    UnsupportedVersion(i64),

    #[error("unsupported feature ({reason}) in nodes {nodes:?}")]
    UnsupportedFeature { reason: String, nodes: Vec<i64> },

    #[error("enumeration exceeds the ceiling of {0} configurations")]
    SizeGuard(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("task generation failed after {0} adjustment rounds")]
    GenerationFailed(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
