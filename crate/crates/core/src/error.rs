//! Error type shared by every module of the toolkit.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: malformed record: {reason}", .path.display())]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{}: bad magic bytes {found:?}, expected {expected:?}", .path.display())]
    BadMagic {
        path: PathBuf,
        expected: [u8; 4],
        found: [u8; 4],
    },

    #[error("{}: bad header: {reason}", .path.display())]
    BadHeader { path: PathBuf, reason: String },

    #[error("{}: unsupported format version {version}", .path.display())]
    BadVersion { path: PathBuf, version: u32 },

    #[error("{}: payload is {actual} bytes, header declares {expected}", .path.display())]
    TruncatedPayload {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("non-finite value at frame {frame}, component {component}")]
    NonFiniteValue { frame: usize, component: usize },

    #[error("need at least {k} frames to train {k} centroids, got {frames}")]
    InsufficientPoints { frames: usize, k: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("incompatible tables: {0}")]
    IncompatibleTables(String),

    #[error("length totals must be positive")]
    ZeroLength,

    #[error("rank-frequency distribution of an empty table")]
    EmptyTable,

    #[error("bad trim band [{lo}, {hi}]: need 0 <= lo < hi <= 1")]
    BadBand { lo: f64, hi: f64 },

    #[error("too few points to fit{}: {have} (need at least 2)", group_suffix(.group))]
    TooFewPoints { have: usize, group: Option<String> },

    #[error("all points share rank {rank}; slope is undefined")]
    DegeneratePoints { rank: f64 },

    #[error("invalid point (rank {rank}, count {count}): ranks must be >= 1 and counts > 0")]
    InvalidPoint { rank: f64, count: f64 },

    #[error("reference group {0:?} not present")]
    MissingReference(String),

    #[error("group {group:?} has {have} utterances, need {need}")]
    InsufficientData {
        group: String,
        have: usize,
        need: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn group_suffix(group: &Option<String>) -> String {
    match group {
        Some(g) => format!(" for group {g:?}"),
        None => String::new(),
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's inputs rather than by the
    /// environment (the CLI maps these to exit code 2).
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound)
    }
}
