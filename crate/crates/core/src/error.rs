use std::path::PathBuf;

use thiserror::Error;

use crate::calibration::CalibrationError;
use crate::ring_geometry::GeometryError;
use crate::temporal::MatchError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Line-level problems found while parsing text inputs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("malformed header, expected `{expected}`")]
    MalformedHeader { expected: &'static str },
    #[error("malformed line: {0}")]
    MalformedLine(String),
    #[error("ring index {0} out of range (must be < 16)")]
    RingOutOfRange(i64),
    #[error("duplicate azimuth {azimuth} on ring {ring}")]
    NonMonotoneAzimuth { ring: usize, azimuth: f64 },
    #[error("non-finite or non-positive range {0}")]
    NonFiniteRange(f64),
    #[error("azimuth {0} outside [0, 360)")]
    AzimuthOutOfRange(f64),
    #[error("range {range} disagrees with |xyz| = {norm}")]
    RangeMismatch { range: f64, norm: f64 },
    #[error("invalid number `{0}`")]
    InvalidNumber(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{}:{line}: {kind}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        kind: ParseErrorKind,
    },
    #[error("{}: missing key `{key}`", path.display())]
    MissingKey { path: PathBuf, key: String },
    #[error("{}:{line}: duplicate key `{key}`", path.display())]
    DuplicateKey {
        path: PathBuf,
        line: usize,
        key: String,
    },
    #[error("{}: `{key}` out of range: {reason}", path.display())]
    OutOfRange {
        path: PathBuf,
        key: String,
        reason: String,
    },
    #[error("frame {frame}: referenced file {} does not exist", path.display())]
    DanglingReference { frame: u32, path: PathBuf },
    #[error("{}:{line}: frame id {id} does not follow {previous}", path.display())]
    UnorderedFrames {
        path: PathBuf,
        line: usize,
        previous: u32,
        id: u32,
    },
    #[error("{}: pixel ({x}, {y}) has invalid label {label}", path.display())]
    InvalidLabel {
        path: PathBuf,
        x: u32,
        y: u32,
        label: u8,
    },
    #[error("confidence {value} at ({x}, {y}) outside [0, 1]")]
    ConfidenceOutOfRange { x: u32, y: u32, value: f32 },
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("invalid value: {0}")]
    Invalid(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, kind: ParseErrorKind) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            kind,
        }
    }

    /// Broad category, used by front ends to pick an exit status.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } | Error::DanglingReference { .. } => ErrorCategory::Io,
            Error::Image { source, .. } => match source {
                image::ImageError::IoError(_) => ErrorCategory::Io,
                _ => ErrorCategory::DataFormat,
            },
            Error::Parse { .. }
            | Error::MissingKey { .. }
            | Error::DuplicateKey { .. }
            | Error::OutOfRange { .. }
            | Error::UnorderedFrames { .. }
            | Error::InvalidLabel { .. }
            | Error::ConfidenceOutOfRange { .. }
            | Error::DimensionMismatch { .. }
            | Error::Invalid(_) => ErrorCategory::DataFormat,
            Error::Config(_) => ErrorCategory::Usage,
            Error::Geometry(_) | Error::Match(_) | Error::Calibration(_) => {
                ErrorCategory::Numerical
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Io,
    DataFormat,
    Numerical,
}
