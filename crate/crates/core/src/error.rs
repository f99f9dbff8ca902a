use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sites {first} and {second} are closer than one fabrication pixel")]
    DuplicateSites { first: usize, second: usize },

    #[error("site {index} at ({x}, {y}) lies outside the design rectangle")]
    SiteOutOfBounds { index: usize, x: f64, y: f64 },

    #[error("cell {label} has no pixels in the label map")]
    EmptyCell { label: usize },

    #[error("tessellation requires at least one site")]
    NoSites,

    #[error("grid mismatch: expected {expected:?}, found {found:?}")]
    GridMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("infeasible `k` = {k}: cannot place that many sites one fabrication pixel apart ({attempts} attempts)")]
    InfeasibleK { k: usize, attempts: usize },

    #[error("margin {margin} m excludes every cell")]
    MarginTooLarge { margin: f64 },

    #[error("non-finite value in channel {channel} at iteration {iteration}")]
    NonFinite { channel: usize, iteration: usize },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("malformed {format} data: {reason}")]
    Format {
        format: &'static str,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            format,
            reason: reason.into(),
        }
    }
}
