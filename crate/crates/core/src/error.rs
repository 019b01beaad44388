use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("episode finished at slot {0}; call reset first")]
    EpisodeFinished(usize),

    #[error("expected {expected} actions, got {got}")]
    ActionCount { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("point is off the simplex (sum = {sum})")]
    OffSimplex { sum: f64 },

    #[error("scenario rejected: {0}")]
    Scenario(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("worker {worker} failed: {message}")]
    Worker { worker: usize, message: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
