use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{}: bad IDX magic {found} (expected {expected})", .path.display())]
    BadMagic { path: PathBuf, expected: u32, found: u32 },

    #[error("{}: truncated IDX file ({detail})", .path.display())]
    Truncated { path: PathBuf, detail: String },

    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("MNIST files not found: expected {}", .expected.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingData { expected: Vec<PathBuf> },

    #[error("realization plan violates normalization: {0}")]
    Construction(String),

    #[error("degenerate least-squares fit: the network vanishes on every sample")]
    DegenerateFit,

    #[error("undefined for an all-zero matrix")]
    ZeroMatrix,

    #[error("training diverged at iteration {iteration}: non-finite loss (neuron {neuron:?})")]
    Divergence { iteration: usize, neuron: Option<usize> },

    #[error("dataset already preprocessed (provenance {0})")]
    AlreadyPreprocessed(String),

    #[error("empty activation region: {0}")]
    EmptyRegion(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
