use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input; `path` names the offending location (row, JSON path or XML element).
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    /// Well-formed input that violates a document model invariant.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at {line}:{column}: {message} (expected one of: {})", expected.join(", "))]
    Parse {
        line: usize,
        column: usize,
        message: String,
        expected: Vec<String>,
    },

    #[error("rule evaluation error: {0}")]
    Eval(String),

    /// Requested a pipeline stage whose inputs have not been computed yet.
    #[error("stage error: {0}")]
    Stage(String),

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("model schema mismatch: model {model:#x}, features {features:#x}")]
    SchemaMismatch { model: u64, features: u64 },

    #[error("no extraction report for source `{0}`")]
    MissingReport(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}
