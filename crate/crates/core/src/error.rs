use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate filter bank: {0}")]
    DegenerateBank(String),

    #[error("index {index} out of range (valid: {valid})")]
    Index { index: usize, valid: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("frame has {samples} samples but the filter bank holds {max}")]
    FrameTooLong { samples: usize, max: usize },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("class {class:?} has {count} samples, at least {required} required")]
    DegenerateClass {
        class: String,
        count: usize,
        required: usize,
    },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("matrix is not positive definite: {0}")]
    NonPositiveDefinite(String),

    #[error("too few samples: {0}")]
    TooFewSamples(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("confusion matrix row {0} is empty")]
    EmptyRow(usize),

    #[error("cannot place {classes} signatures with separation {separation}")]
    InfeasibleSeparation { classes: usize, separation: f64 },

    #[error("bad magic in {path}: expected \"WSTF\"")]
    MagicMismatch { path: PathBuf },

    #[error("unsupported frame file version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated file {path}: {detail}")]
    TruncatedFile { path: PathBuf, detail: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable, machine-parsable identifier used as the prefix of CLI error lines
    /// and in service error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(_) => "E_CONFIG",
            Error::DegenerateBank(_) => "E_DEGENERATE_BANK",
            Error::Index { .. } => "E_INDEX",
            Error::LengthMismatch { .. } => "E_LENGTH_MISMATCH",
            Error::FrameTooLong { .. } => "E_FRAME_TOO_LONG",
            Error::InvalidFrame(_) => "E_INVALID_FRAME",
            Error::InvalidDataset(_) => "E_INVALID_DATASET",
            Error::DegenerateClass { .. } => "E_DEGENERATE_CLASS",
            Error::SingularSystem(_) => "E_SINGULAR_SYSTEM",
            Error::NonPositiveDefinite(_) => "E_NON_POSITIVE_DEFINITE",
            Error::TooFewSamples(_) => "E_TOO_FEW_SAMPLES",
            Error::DimensionMismatch(_) => "E_DIMENSION_MISMATCH",
            Error::EmptyRow(_) => "E_EMPTY_ROW",
            Error::InfeasibleSeparation { .. } => "E_INFEASIBLE_SEPARATION",
            Error::MagicMismatch { .. } => "E_MAGIC_MISMATCH",
            Error::UnsupportedVersion(_) => "E_UNSUPPORTED_VERSION",
            Error::TruncatedFile { .. } => "E_TRUNCATED_FILE",
            Error::Schema(_) => "E_SCHEMA",
            Error::Io { .. } => "E_IO",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
