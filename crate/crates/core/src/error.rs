use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of an operation (non-finite input,
    /// out-of-range class, shape mismatch).
    #[error("domain error: {0}")]
    Domain(String),

    /// Quadratic weighted kappa with a zero expected-disagreement term (0/0).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Continuous kappa loss with a zero denominator.
    #[error("undefined loss: {0}")]
    UndefinedLoss(String),

    #[error("training diverged: non-finite {what} at parameter index {index}")]
    Divergence { what: &'static str, index: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("synthetic generation failed: {0}")]
    Generation(String),

    #[error("decision rule `{rule}` is not supported by a {mode} model")]
    UnsupportedRule { rule: String, mode: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
