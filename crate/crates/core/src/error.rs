use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("ids overlap the exclusion list: {0:?}")]
    ExclusionOverlap(Vec<String>),

    #[error("caption {caption_id:?} references unknown image {image_id:?}")]
    DanglingImage { caption_id: String, image_id: String },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },

    #[error("row/id count mismatch: header says {rows} rows, id list has {ids}")]
    CountMismatch { rows: usize, ids: usize },

    #[error("payload length mismatch: expected {expected} bytes, found {found}")]
    PayloadLength { expected: usize, found: usize },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("row {0:?} has zero norm")]
    ZeroRow(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("index {index} out of range for length {len}")]
    InvalidIndex { index: usize, len: usize },

    #[error("unknown id {0:?}")]
    UnknownId(String),

    #[error("missing embedding for {0:?}")]
    MissingEmbedding(String),

    #[error("only {found} distinct candidates available, need {needed}")]
    TooFewCandidates { found: usize, needed: usize },

    #[error("ground-truth id {truth:?} for query {query:?} is not among the candidates")]
    TruthNotInCandidates { query: String, truth: String },

    #[error("query {0:?} has no ground truth")]
    MissingTruth(String),

    #[error("pool size mismatch: {left} vs {right}")]
    PoolSizeMismatch { left: usize, right: usize },

    #[error("review items still pending: {0:?}")]
    PendingReview(Vec<String>),

    #[error("missing clipscore for caption {0:?}")]
    MissingScore(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }
}
