use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported or malformed image: {0}")]
    Format(String),

    #[error("invalid image data: {0}")]
    InvalidImage(String),

    #[error("image too small: {width}x{height}, need at least {min_width}x{min_height}")]
    TooSmall {
        width: usize,
        height: usize,
        min_width: usize,
        min_height: usize,
    },

    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimMismatch(usize, usize, usize, usize),

    #[error("every window was degenerate")]
    AllDegenerate,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("env weight {0} outside [0, 1]")]
    EnvOutOfRange(f64),

    #[error("dataset is empty or too small: {0}")]
    EmptyDataset(String),

    #[error("non-finite loss at step {0}")]
    NonFiniteLoss(usize),

    #[error("ranking needs at least 2 methods, got {0}")]
    TooFewMethods(usize),

    #[error("non-finite score at position {0}")]
    NonFiniteScore(usize),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("ranks are not a permutation of 1..={0}")]
    NotAPermutation(usize),

    #[error("unknown column {0:?}")]
    UnknownColumn(String),

    #[error("artifact error: {0}")]
    Artifact(String),

    #[error("dataset layout: {0}")]
    Layout(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "Io",
            Error::Format(_) => "Format",
            Error::InvalidImage(_) => "InvalidImage",
            Error::TooSmall { .. } => "TooSmall",
            Error::DimMismatch(..) => "DimMismatch",
            Error::AllDegenerate => "AllDegenerate",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::EnvOutOfRange(_) => "EnvOutOfRange",
            Error::EmptyDataset(_) => "EmptyDataset",
            Error::NonFiniteLoss(_) => "NonFiniteLoss",
            Error::TooFewMethods(_) => "TooFewMethods",
            Error::NonFiniteScore(_) => "NonFiniteScore",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::NotAPermutation(_) => "NotAPermutation",
            Error::UnknownColumn(_) => "UnknownColumn",
            Error::Artifact(_) => "Artifact",
            Error::Layout(_) => "LayoutError",
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn too_small(width: usize, height: usize, min_width: usize, min_height: usize) -> Self {
        Error::TooSmall {
            width,
            height,
            min_width,
            min_height,
        }
    }
}
