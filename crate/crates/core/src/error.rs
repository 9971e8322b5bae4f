use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("unknown feature map `{name}`; valid names are: {}", valid.join(", "))]
    UnknownFeatureMap { name: String, valid: Vec<String> },

    #[error("data error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Data { line: Option<u64>, msg: String },

    #[error("numerical error: {0}")]
    Numeric(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn data(line: Option<u64>, msg: impl Into<String>) -> Self {
        Error::Data {
            line,
            msg: msg.into(),
        }
    }
}
