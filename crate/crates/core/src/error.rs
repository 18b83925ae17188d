use std::path::PathBuf;

use thiserror::Error;

use crate::model::Slot;

#[derive(Debug, Error)]
pub enum Error {
    #[error("genome has {actual} genes, expected {expected}")]
    GenomeLength { expected: usize, actual: usize },

    #[error("gene {index} = {value} lies outside [-1, 1]")]
    GeneOutOfRange { index: usize, value: f64 },

    #[error("trajectory has {actual} steps, expected {expected}")]
    TrajectoryLength { expected: usize, actual: usize },

    #[error("slot {} is not eligible on both descriptors", .0.number())]
    IneligibleSlot(Slot),

    #[error("neighbor count k must be at least 1")]
    ZeroNeighbors,

    #[error("cannot take {requested} individuals from a pool of {available}")]
    PoolTooSmall { requested: usize, available: usize },

    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("successful trajectory {0} has no recorded first contact")]
    MissingContact(usize),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: unsupported repertoire format version {found} (this build reads version {supported})")]
    IncompatibleVersion {
        path: PathBuf,
        found: u32,
        supported: u32,
    },

    #[error("environment hash mismatch: file was produced with {expected}, current config hashes to {actual}")]
    ConfigHashMismatch { expected: String, actual: String },

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

pub type Result<T, E = Error> = std::result::Result<T, E>;
