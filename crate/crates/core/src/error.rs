use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A zero denominator in one of the lens equations.
    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    /// Parameters violating a type invariant (non-positive distances, zero focal length...).
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("level {0} is outside the supported range 1..=9")]
    BadLevel(u8),

    #[error("lens region does not intersect the {width}x{height} frame")]
    DegenerateRegion { width: usize, height: usize },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("mask selects no valid pixels")]
    EmptyMask,

    #[error("no fiducial blob of at least {min_pixels} pixels below threshold {threshold}")]
    FiducialNotFound { threshold: u8, min_pixels: usize },

    #[error("denominator must be positive, got {0}")]
    NonPositiveDenominator(f64),

    #[error("image is {width}x{height}, smaller than the required {min}x{min}")]
    TooSmall {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("level {level}: {source}")]
    AtLevel {
        level: u8,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(offset: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error is a domain failure (the inputs were well formed but
    /// describe a configuration with no answer) rather than a usage or I/O problem.
    pub fn is_domain(&self) -> bool {
        match self {
            Error::SingularConfiguration(_)
            | Error::FiducialNotFound { .. }
            | Error::EmptyMask
            | Error::NonPositiveDenominator(_) => true,
            Error::AtLevel { source, .. } => source.is_domain(),
            _ => false,
        }
    }
}
