use std::fmt;

/// Coarse classification of an [`Error`], used by front ends to pick an exit
/// status and a machine-readable tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad arguments or parameters supplied by the caller.
    Usage,
    /// Input data could not be parsed or is inconsistent with its format.
    InputFormat,
    /// Well-formed input that violates a domain invariant.
    Invariant,
    /// Operating-system level I/O failure.
    Io,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Usage => "usage",
            ErrorCategory::InputFormat => "input-format",
            ErrorCategory::Invariant => "invariant-violation",
            ErrorCategory::Io => "io",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("malformed RLE counts: {0}")]
    MalformedCounts(String),

    #[error("undefined geometry: both boxes have zero area")]
    UndefinedGeometry,

    #[error("region of interest is empty after clipping to the image")]
    EmptyRoi,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("inconsistent embedding length: expected {expected}, got {actual}")]
    EmbeddingLength { expected: usize, actual: usize },

    #[error("overlapping masks in frame {frame}: ids {first} and {second}")]
    Overlap {
        frame: usize,
        first: String,
        second: String,
    },

    #[error("frame range mismatch: {0}")]
    FrameRange(String),

    #[error("unknown class: {0}")]
    UnknownClass(String),

    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid file format: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidParameter(_) | Error::UnknownClass(_) => ErrorCategory::Usage,
            Error::MalformedCounts(_)
            | Error::Parse { .. }
            | Error::Format(_)
            | Error::Json(_)
            | Error::EmbeddingLength { .. } => ErrorCategory::InputFormat,
            Error::Io(_) => ErrorCategory::Io,
            Error::DimensionMismatch { .. }
            | Error::InvalidMask(_)
            | Error::UndefinedGeometry
            | Error::EmptyRoi
            | Error::InvalidDistribution(_)
            | Error::EmptyInput(_)
            | Error::NonFinite(_)
            | Error::Overlap { .. }
            | Error::FrameRange(_)
            | Error::InvalidAnnotation(_) => ErrorCategory::Invariant,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
