use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced by the library.
///
/// Variants fall into three groups: configuration and usage problems, data
/// problems, and numeric failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("vocabulary line {line}: {message}")]
    Vocabulary { line: usize, message: String },

    #[error("invalid hierarchy: {0}")]
    Hierarchy(String),

    #[error("label index {index} out of range for layer {layer} with {len} labels")]
    LabelOutOfRange { layer: usize, index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    Dimension {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("eigen-decomposition did not converge after {sweeps} sweeps (off-diagonal ratio {ratio:e})")]
    NoConvergence { sweeps: usize, ratio: f64 },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (supported: {supported})")]
    Version { found: u16, supported: u16 },

    #[error("file truncated while reading {0}")]
    Truncated(&'static str),

    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("malformed record: {0}")]
    Malformed(String),

    #[error("shape mismatch for tensor {name}: expected {expected:?}, found {found:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by numerics rather than inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::NoConvergence { .. })
    }

    /// True for configuration or usage problems.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize, context: &'static str) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected,
            actual,
            context,
        })
    }
}
