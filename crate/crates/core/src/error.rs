use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside {expected}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("chromaticity of a zero tristimulus vector is undefined")]
    DegenerateChromaticity,

    #[error("invalid constellation: {0}")]
    Constellation(String),

    #[error("invalid channel parameters: {0}")]
    Channel(String),

    #[error("invalid raw frame: {0}")]
    Frame(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("invalid LDPC code: {0}")]
    Code(String),

    #[error("unknown code rate {0:?}")]
    UnknownRate(String),

    #[error("parity part of the check matrix is rank deficient (rank {rank} < {expected})")]
    RankDeficient { rank: usize, expected: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
