use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u8, found: u8 },

    #[error("reserved header bytes must be zero")]
    ReservedBytes,

    #[error("payload length mismatch: header implies {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },

    #[error("non-zero padding bits in SE flag bitmap")]
    NonZeroPadding,

    #[error("non-finite value at index {index}")]
    NonFiniteValue { index: usize },

    #[error("non-finite input{}", index.map(|i| format!(" at index {i}")).unwrap_or_default())]
    NonFiniteInput { index: Option<usize> },

    #[error("non-canonical code at index {index}")]
    NonCanonicalCode { index: usize },

    #[error("invalid quantizer config: {0}")]
    InvalidConfig(String),

    #[error("empty tensor")]
    EmptyTensor,

    #[error("percentile {0} outside (0, 100]")]
    PercentileOutOfRange(f64),

    #[error("degenerate calibration range: percentile of |x| is zero")]
    DegenerateRange,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("reference signal has zero power")]
    ZeroSignal,

    #[error("invalid distribution spec: {0}")]
    InvalidSpec(String),

    #[error("invalid SSM parameters: {0}")]
    InvalidParams(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// Attaches an element index to errors raised by scalar operations.
    pub(crate) fn at(self, index: usize) -> Self {
        match self {
            Error::NonFiniteInput { index: None } => Error::NonFiniteInput { index: Some(index) },
            Error::NonCanonicalCode { .. } => Error::NonCanonicalCode { index },
            other => other,
        }
    }

    /// True for failures of the underlying file system rather than the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }

    pub fn is_invariant(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}
