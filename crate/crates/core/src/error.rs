use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("BS {bs} and user {user} are co-located")]
    CoLocated { bs: usize, user: usize },

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("antenna count {0} is not a perfect square")]
    NotSquare(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("zero channel row for user {user} at BS {bs}")]
    ZeroChannel { bs: usize, user: usize },

    #[error("channel matrix of BS {bs} is rank deficient (condition number {cond:.3e})")]
    RankDeficient { bs: usize, cond: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("backward called on a consumed tape")]
    TapeConsumed,

    #[error("empty batch")]
    EmptyBatch,

    #[error("training diverged at episode {episode}, slot {slot}: {what}")]
    Diverged {
        episode: usize,
        slot: usize,
        what: String,
    },

    #[error("checkpoint does not match config: {0}")]
    CheckpointMismatch(String),

    #[error("malformed checkpoint: {0}")]
    CheckpointFormat(String),

    #[error("missing checkpoints for K = {0:?}")]
    MissingCheckpoints(Vec<usize>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
