use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid UTF-8 at byte offset {offset}")]
    Decode { path: PathBuf, offset: usize },

    #[error("document `{0}` is empty")]
    EmptyDocument(String),

    #[error("document `{doc_id}` has {words} words, cannot form {chunks} chunks")]
    InsufficientText {
        doc_id: String,
        words: usize,
        chunks: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("degenerate embedding: zero vector")]
    DegenerateEmbedding,

    #[error("degenerate background: all {0} sampled scores are equal")]
    DegenerateBackground(usize),

    #[error("scorer `{scorer}` needs {resource}")]
    MissingResource {
        scorer: &'static str,
        resource: String,
    },

    #[error("cell ({row}, {col}): {source}")]
    Cell {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite similarity {value} at cell ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("only {found} pairs with a positive alignment score ({excluded} excluded), need at least 2")]
    InsufficientNullSample { found: usize, excluded: usize },

    #[error("gumbel fit did not converge: {0}")]
    NonConvergence(String),

    #[error("degenerate correlation: {0}")]
    DegenerateCorrelation(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Prefixes a format error's detail with the file it came from.
    pub(crate) fn in_file(self, path: &std::path::Path) -> Self {
        match self {
            Error::Format { what, detail } => Error::Format {
                what,
                detail: format!("{}: {detail}", path.display()),
            },
            other => other,
        }
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}
