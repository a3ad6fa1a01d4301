use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the retrieval stack.
///
/// Variants are grouped by the exit status the command-line tool maps them
/// to; see [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },

    #[error("proposition {prop_id:?} references unknown document {doc_id:?}")]
    DanglingDocument { prop_id: String, doc_id: String },

    #[error("document {doc_id:?} has two propositions with ordinal {ordinal}")]
    DuplicateOrdinal { doc_id: String, ordinal: u32 },

    #[error("{kind} {id:?} has empty text")]
    EmptyText { kind: &'static str, id: String },

    #[error("unknown proposition {0:?}")]
    UnknownProposition(String),

    #[error("missing embedding for {0:?}")]
    MissingEmbedding(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: &'static str, found: String },

    #[error("truncated {what}: expected {expected} bytes, found {found}")]
    Truncated {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{what} = {value} out of range [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },

    #[error("query has no real-valued projection to re-rank with")]
    MissingRealQuery,

    #[error("template placeholder {0} unresolved")]
    UnresolvedPlaceholder(String),

    #[error("empty retrieval: {0}")]
    EmptyRetrieval(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 input error, 3 empty result, 4 numeric failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::EmptyRetrieval(_) => 3,
            Error::Numeric(_) | Error::NonFinite { .. } => 4,
            _ => 2,
        }
    }

    /// Short machine-readable category used in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Malformed { .. } | Error::Json(_) => "malformed",
            Error::EmptyCorpus => "empty_corpus",
            Error::DuplicateId { .. } | Error::DuplicateOrdinal { .. } => "duplicate",
            Error::DanglingDocument { .. } => "dangling_reference",
            Error::EmptyText { .. } => "empty_text",
            Error::UnknownProposition(_) => "unknown_proposition",
            Error::MissingEmbedding(_) => "missing_embedding",
            Error::BadMagic { .. } => "bad_magic",
            Error::Truncated { .. } => "truncated",
            Error::NonFinite { .. } => "non_finite",
            Error::Shape(_) => "shape",
            Error::Config(_) => "config",
            Error::OutOfRange { .. } => "out_of_range",
            Error::MissingRealQuery => "missing_real_query",
            Error::UnresolvedPlaceholder(_) => "template",
            Error::EmptyRetrieval(_) => "empty_retrieval",
            Error::Numeric(_) => "numeric",
        }
    }
}
