use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state ({row}, {col}) is outside the {height}x{width} grid")]
    StateOutOfBounds {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("discount factor {gamma} must lie in [0, 1) for value iteration to converge")]
    Divergence { gamma: f64 },

    #[error("{agents} agents cannot select pairwise distinct pairs out of {pairs}")]
    Infeasible { agents: usize, pairs: usize },

    #[error("no pair of distinct outcomes has positive probability")]
    NoValidOutcome,

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
