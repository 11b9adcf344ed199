use std::path::PathBuf;

/// Errors produced by the mining toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("truncated payload in {path}: expected {expected} bytes, got {got}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        got: u64,
    },

    #[error("checksum mismatch in {path}: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch {
        path: PathBuf,
        stored: u32,
        computed: u32,
    },

    #[error("non-finite score at frame {frame}, label {label}")]
    NonFiniteScore { frame: usize, label: usize },

    #[error("{path}:{line}: malformed line: {reason}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("full-mode alignment needs {projected} bytes, budget is {budget}")]
    MemoryBudgetExceeded { projected: usize, budget: usize },

    #[error("frame budget {budget} too small: expansion needs at least {required} frames")]
    InsufficientFrames { required: usize, budget: usize },

    #[error("similarity ratio undefined for two empty strings")]
    UndefinedRatio,

    #[error("character {ch:?} is not in the label set")]
    UnknownChar { ch: char },

    #[error("label index {label} out of range for label set of size {size}")]
    LabelOutOfRange { label: usize, size: usize },

    #[error("pair too long for exhaustive alignment: {len} > {max}")]
    OracleGuard { len: usize, max: usize },

    #[error("no documents processed successfully ({failed} failed)")]
    NoSuccessfulDocuments { failed: usize },

    #[error("audio id mismatch: records have {records:?}, ground truth has {truth:?}")]
    AudioIdMismatch { records: String, truth: String },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
