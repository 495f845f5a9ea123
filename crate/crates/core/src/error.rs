use std::path::PathBuf;

use crate::Label;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{source_name}:{line}: {reason}")]
    Malformed {
        source_name: String,
        line: usize,
        reason: String,
    },

    #[error("{source_name}:{line}: duplicate variant key {key:?}")]
    DuplicateKey {
        source_name: String,
        line: usize,
        key: String,
    },

    #[error("lexicon chain: {variant:?} maps to {canonical:?}, which is itself a variant key")]
    LexiconChain { variant: String, canonical: String },

    #[error("span ({start}, {end}) out of bounds for text of length {len}")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },

    #[error("unparsable host in {0:?}")]
    UnparsableHost(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("target of {target} clusters exceeds {available} substrings")]
    TooManyClusters { target: usize, available: usize },

    #[error("substring {substring:?} appears in clusters {first:?} and {second:?}")]
    DuplicateSubstring {
        substring: String,
        first: String,
        second: String,
    },

    #[error("invalid cluster set: {0}")]
    InvalidClusterSet(String),

    #[error("training data has no {missing} examples")]
    SingleClass { missing: Label },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value at row {row}, feature {feature}")]
    NonFinite { row: usize, feature: usize },

    #[error("schema mismatch: expected {expected:?}, found {found:?}")]
    SchemaMismatch { expected: String, found: String },

    #[error("corrupt model payload: {0}")]
    CorruptModel(String),

    #[error("unsupported model format version {found} (this build reads major version {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },

    #[error("sender {sender:?}: timestamp {ts} is more than the allowed skew behind {newest}")]
    TimestampRegression { sender: String, ts: u64, newest: u64 },

    #[error("confusion matrix has no {0} examples")]
    EmptyClass(Label),

    #[error("fold {fold} has no {missing} examples; use fewer folds")]
    FoldMissingClass { fold: usize, missing: Label },

    #[error("stream is not ordered by timestamp at item {index}")]
    UnorderedStream { index: usize },

    #[error("{source_name}:{line}: {source}")]
    Json {
        source_name: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(source_name: &str, line: usize, reason: impl Into<String>) -> Self {
        Error::Malformed {
            source_name: source_name.to_string(),
            line,
            reason: reason.into(),
        }
    }

    /// True for errors caused by a model or feature layout that does not fit
    /// the data it is applied to.
    pub fn is_schema_error(&self) -> bool {
        matches!(
            self,
            Error::SchemaMismatch { .. }
                | Error::DimensionMismatch { .. }
                | Error::CorruptModel(_)
                | Error::UnsupportedVersion { .. }
        )
    }
}

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
