use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("equirectangular image must be 2:1, got {width}x{height}")]
    NotTwoToOne { width: usize, height: usize },

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("{count} pixels are not covered by any view")]
    Uncovered { count: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid codebook: {0}")]
    Codebook(String),

    #[error("not enough distinct patches for k-means: found {found}, need {needed}")]
    NotEnoughPatches { found: usize, needed: usize },

    #[error("code grid holds MASK at row {row}, column {col}")]
    MaskedCode { row: usize, col: usize },

    #[error("predictor contract violated: {0}")]
    Predictor(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("invalid condition: {0}")]
    Condition(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;
