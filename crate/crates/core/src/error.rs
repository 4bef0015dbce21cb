use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("pixel ({x}, {y}) color {rgb:?} is not within tolerance of any palette entry")]
    UnknownColor { x: usize, y: usize, rgb: [u8; 3] },

    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    #[error("{width}x{height} is not divisible by patch side {side}")]
    NotDivisible {
        width: usize,
        height: usize,
        side: usize,
    },

    #[error("crop side {side} exceeds image {width}x{height}")]
    CropTooLarge {
        width: usize,
        height: usize,
        side: usize,
    },

    #[error("class {class} has zero frequency")]
    ZeroFrequency { class: usize },

    #[error("expected a {expected}-channel image, got {actual}")]
    Channels { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {message}")]
    Context { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn dims(left: (usize, usize), right: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            left_w: left.0,
            left_h: left.1,
            right_w: right.0,
            right_h: right.1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a file path to an error raised while handling that file.
    pub fn at(self, path: impl Into<PathBuf>) -> Self {
        match self {
            e @ (Error::Io { .. } | Error::Image { .. } | Error::Context { .. }) => e,
            other => Error::Context {
                path: path.into(),
                message: other.to_string(),
            },
        }
    }

    /// Process exit code: 2 config error, 3 data error, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParam(_) => 2,
            Error::Numeric(_) => 4,
            Error::Context { message, .. } if message.starts_with("invalid config") => 2,
            Error::Context { message, .. } if message.starts_with("numeric failure") => 4,
            _ => 3,
        }
    }
}
