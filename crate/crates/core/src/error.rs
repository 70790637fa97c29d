//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field kind: expected {expected}, got {got}")]
    InvalidKind { expected: &'static str, got: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("mask selects no voxels")]
    EmptyMask,

    #[error("prescribed volume-change map must be strictly positive (min {min})")]
    NonPositiveMonitor { min: f64 },

    #[error("not a NIfTI-1 file: bad magic {0:02x?}")]
    BadMagic([u8; 4]),

    #[error("unsupported NIfTI variant: {0}")]
    UnsupportedFormat(String),

    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),

    #[error("truncated NIfTI payload: expected {expected} bytes, got {got}")]
    TruncatedPayload { expected: usize, got: usize },

    #[error("invalid NIfTI header: {0}")]
    InvalidHeader(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
