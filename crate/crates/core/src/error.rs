use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain an operation is defined on.
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Every pixel carries zero weight, so the objective is undefined.
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error(transparent)]
    Flo(#[from] FloError),

    #[error(transparent)]
    Pfm(#[from] PfmError),

    #[error(transparent)]
    Table(#[from] TableFileError),

    #[error("image: {0}")]
    Image(#[from] image::ImageError),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("scene file: {0}")]
    SceneFile(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

/// Failures while decoding or encoding Middlebury `.flo` files.
#[derive(Debug, Error)]
pub enum FloError {
    #[error("bad .flo magic {0}")]
    BadMagic(f32),
    #[error(".flo payload truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error(".flo header advertises {width}x{height}, which exceeds the size limit")]
    DimensionOverflow { width: i64, height: i64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum PfmError {
    #[error("malformed PFM header: {0}")]
    MalformedHeader(String),
    #[error("PFM is not single-channel (header {0:?})")]
    NotGrayscale(String),
    #[error("PFM payload truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum TableFileError {
    #[error("bad lookup-table magic")]
    BadMagic,
    #[error("lookup-table payload truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("lookup-table header advertises axes {0:?}, which exceeds the size limit")]
    DimensionOverflow([u32; 3]),
    #[error("lookup-table content invalid: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}
