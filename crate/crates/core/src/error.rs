use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("non-finite latent")]
    NonFinite,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("incomparable prompts")]
    IncomparablePrompts,

    #[error("empty evaluation region")]
    EmptyRegion,

    #[error("incompatible cache format")]
    IncompatibleFormat,

    #[error("duplicate cache entry id {0}")]
    DuplicateEntry(u64),

    #[error("empty records")]
    EmptyRecords,

    #[error("{path}:{line}: malformed record: {msg}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

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
}
