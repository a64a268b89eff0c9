use std::path::PathBuf;

/// Errors raised by the toolkit.
///
/// Variants split into two families: I/O failures (missing or unreadable
/// files) and validation failures (malformed inputs, violated
/// preconditions). [`Error::is_io`] tells them apart.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("truncated payload: {0}")]
    Truncated(String),

    #[error("no rows")]
    NoRows,

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown model id {0}")]
    UnknownModel(u32),

    #[error("unknown prompt id {0}")]
    UnknownPrompt(u32),

    #[error("model {model} has no records for prompt {prompt}")]
    MissingCell { model: u32, prompt: u32 },

    #[error("cell (prompt {prompt}, model {model}) has {available} records, need more than {k_ref}")]
    SplitInfeasible {
        prompt: u32,
        model: u32,
        available: usize,
        k_ref: usize,
    },

    #[error("zero vector")]
    ZeroVector,

    #[error("undefined correlation: {0} has zero variance")]
    UndefinedCorrelation(&'static str),

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("malformed PGM: {0}")]
    Pgm(String),

    #[error("image too small: {width}x{height}, need at least {min}x{min}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("image is not square: {width}x{height}")]
    NotSquare { width: usize, height: usize },

    #[error("power-law fit needs at least 3 positive bins in band, found {0}")]
    InsufficientBins(usize),

    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize, trace: Vec<f64> },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
