use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{op}: argument {value} outside the domain ({reason})")]
    Domain {
        op: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("well/barrier certificate failed: {0}")]
    Hypothesis(String),

    #[error("non-finite potential value at node {index} (R = {r})")]
    NonFinite { index: usize, r: f64 },

    #[error("distortion too strong: Re phi' = {value} at R = {r}")]
    Distortion { r: f64, value: f64 },

    #[error("filled well dips to {value} <= m2 = {m2} at R = {r}")]
    Fill { r: f64, value: f64, m2: f64 },

    #[error("{solver} did not converge: {detail}")]
    Convergence { solver: &'static str, detail: String },

    #[error("singular pivot at index {index}")]
    Singular { index: usize },

    #[error("precondition violated in {op}: {detail}")]
    Precondition { op: &'static str, detail: String },

    #[error("table: {0}")]
    Table(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Precondition {
        op,
        detail: detail.into(),
    }
}
