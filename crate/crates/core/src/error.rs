use std::path::PathBuf;

use crate::grid::PixelIndex;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("field must have positive width and height")]
    EmptyField,
    #[error("shape mismatch: expected {}x{}, got {found} values", expected.0, expected.1)]
    ShapeMismatch { expected: (usize, usize), found: usize },
    #[error("non-finite value at pixel ({}, {})", pixel.row, pixel.col)]
    NonFinite { pixel: PixelIndex },
    #[error("a segmentation needs at least 2 channels, got {0}")]
    TooFewChannels(usize),
    #[error("negative channel value at pixel ({}, {})", pixel.row, pixel.col)]
    NegativeChannel { pixel: PixelIndex },
    #[error("simplex violated at pixel ({}, {}): channel sum {sum}", pixel.row, pixel.col)]
    SimplexViolation { pixel: PixelIndex, sum: f64 },
    #[error("dual variable out of [-1, 1] at pixel ({}, {}): {value}", pixel.row, pixel.col)]
    DualOutOfRange { pixel: PixelIndex, value: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed {format} data: {reason}")]
    Malformed {
        path: PathBuf,
        format: &'static str,
        reason: String,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, format: &'static str, reason: impl Into<String>) -> Self {
        Self::Malformed {
            path: path.into(),
            format,
            reason: reason.into(),
        }
    }

    /// True for errors that originate from reading or writing files.
    pub fn is_io(&self) -> bool {
        matches!(self, Self::Io { .. } | Self::Malformed { .. } | Self::Image { .. })
    }

    /// True for broken runtime invariants (simplex, dual bounds).
    pub fn is_invariant(&self) -> bool {
        matches!(self, Self::SimplexViolation { .. } | Self::DualOutOfRange { .. })
    }
}
