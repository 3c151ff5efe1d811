use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("inverse transform left an imaginary residue of {residue:.3e} (relative), spectrum is not conjugate-symmetric")]
    SymmetryViolation { residue: f64 },

    #[error("scale index {scale} out of range 1..={max}")]
    InvalidScale { scale: usize, max: usize },

    #[error(
        "grid of size {size} cannot resolve {scales} scales (need an even size of at least {min})"
    )]
    Resolution {
        size: usize,
        scales: usize,
        min: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("component count {k} out of range 1..={max}")]
    InvalidComponentCount { k: usize, max: usize },

    #[error("training needs at least two distinct labels, found {0}")]
    DegenerateLabels(usize),

    #[error("class '{label}' has {count} samples, fewer than the {folds} folds requested")]
    Stratification {
        label: String,
        count: usize,
        folds: usize,
    },

    #[error("cannot crop {height}x{width} image to {size}x{size}")]
    Crop {
        height: usize,
        width: usize,
        size: usize,
    },

    #[error("failed to read image {}: {reason}", path.display())]
    Ingestion { path: PathBuf, reason: String },

    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("malformed tensor file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
