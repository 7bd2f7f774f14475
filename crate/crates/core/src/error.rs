use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything the engine can reject.
///
/// Variants other than [`Error::Io`] describe bad inputs and are reported to
/// the user as data/validation failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: malformed record: {reason}")]
    MalformedLine {
        file: String,
        line: usize,
        reason: String,
    },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("unknown language code {0:?}")]
    UnknownLanguage(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("document {0:?} has no translated_text")]
    MissingTranslation(String),

    #[error("not enough items: needed {needed}, only {available} available ({what})")]
    Insufficient {
        what: String,
        needed: usize,
        available: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("count mismatch: {what} ({left} vs {right})")]
    CountMismatch { what: String, left: usize, right: usize },

    #[error("non-finite value at row {row}")]
    NonFinite { row: usize },

    #[error("row {row} has norm {norm}, too far from unit length")]
    BadNorm { row: usize, norm: f64 },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("query {0:?} has no relevance judgments with grade > 0")]
    NoGold(String),

    #[error("query {0:?} appears in the run but not in the qrels")]
    UnjudgedQuery(String),

    #[error("query {0:?} is judged but missing from the run")]
    MissingRunQuery(String),

    #[error("unknown document {0:?}")]
    UnknownDocument(String),

    #[error("missing score for query {query_id:?}, document {doc_id:?}")]
    MissingScore { query_id: String, doc_id: String },

    #[error("conflicting scores for query {query_id:?}, document {doc_id:?}")]
    ConflictingScore { query_id: String, doc_id: String },

    #[error("negative relevance grade {grade} for query {query_id:?}, document {doc_id:?}")]
    NegativeGrade {
        query_id: String,
        doc_id: String,
        grade: i64,
    },

    #[error("input is constant; rank correlation is undefined")]
    ConstantInput,

    #[error("empty set: {0}")]
    Empty(String),

    #[error("engine {engine} failed on pair {pair} after {completed} completed events: {reason}")]
    Bench {
        engine: String,
        pair: String,
        completed: usize,
        reason: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// True for failures caused by the environment rather than by the data.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound)
    }
}
