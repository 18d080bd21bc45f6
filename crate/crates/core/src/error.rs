use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid task parameters: {0}")]
    InvalidParams(String),

    #[error("unknown task set {0} (expected 1 or 2)")]
    UnknownTaskSet(u8),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("auxiliary set is empty")]
    DegenerateAuxiliary,

    #[error("beta vector selects no samples")]
    ZeroBeta,

    #[error("invalid proportion vector: {0}")]
    InvalidProportions(String),

    #[error("task {task} reservoir holds {available} samples, {requested} requested")]
    ReservoirExhausted {
        task: usize,
        requested: usize,
        available: usize,
    },

    #[error("sample provider failed at iteration {iteration}: {source}")]
    Provider {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("instance too large for the grid oracle: {0}")]
    InstanceTooLarge(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
