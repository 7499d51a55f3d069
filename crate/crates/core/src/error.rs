use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure a pipeline can produce.
///
/// Element-level errors are yielded by the stream at the position of the
/// offending element; they never abort composition.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing field `{0}`")]
    MissingField(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: row has {found} cells, header has {expected}", path.display())]
    RaggedRow {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{}: element {index} is not an object", path.display())]
    NotAnObject { path: PathBuf, index: usize },

    #[error("directory `{0}` is not listed in the class mapping")]
    UnknownClass(String),

    #[error("batch function returned {found} values for a batch of {expected}")]
    BatchArity { expected: usize, found: usize },

    #[error("field `{field}`: shape {found:?} differs from {expected:?}")]
    ShapeMismatch {
        field: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("invalid shard {k} of {n}: need k < n")]
    BadShard { k: usize, n: usize },

    #[error("bad split file {}: {reason}", path.display())]
    BadSplitFile { path: PathBuf, reason: String },

    #[error("key `{0}` is not present in the split file")]
    UnlistedKey(String),

    #[error(transparent)]
    BadPattern(#[from] regex::Error),

    #[error("unexpected split label {0}")]
    UnknownSplitLabel(String),

    #[error("stream is empty")]
    EmptyStream,

    #[error("label field `{field}` holds a non-numeric value")]
    NonNumericLabel { field: String },

    #[error("corrupt cache entry{}: {reason}", path.as_ref().map(|p| format!(" {}", p.display())).unwrap_or_default())]
    CacheCorrupt {
        path: Option<PathBuf>,
        reason: String,
    },

    #[error("expected {expected}, found {found}")]
    TypeMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Raised by user functions passed to `apply` and friends.
    #[error("{0}")]
    Custom(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn custom(msg: impl std::fmt::Display) -> Self {
        Error::Custom(msg.to_string())
    }
}
