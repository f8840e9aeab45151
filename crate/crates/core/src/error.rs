use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("trial {trial}: {message}")]
    Trial { trial: usize, message: String },

    #[error("invalid recording: {0}")]
    InvalidRecording(String),

    #[error("unknown channel '{0}'")]
    UnknownChannel(String),

    #[error("window [{from}, {to}) out of range for {len} samples")]
    WindowOutOfRange { from: usize, to: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input")]
    EmptyInput,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("sample rate mismatch: {expected} Hz vs {actual} Hz")]
    SampleRateMismatch { expected: f64, actual: f64 },

    #[error("data is rank deficient (eigenvalue ratio {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("component index {index} out of range for {count} components")]
    ComponentOutOfRange { index: usize, count: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("wavelet: {0}")]
    Wavelet(String),

    #[error("band '{0}' is not mapped for this decomposition")]
    BandNotMapped(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("dimension mismatch: model expects {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("training data needs at least two classes")]
    SingleClass,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("channel {channel}: {source}")]
    Channel {
        channel: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn in_channel(self, channel: &str) -> Self {
        Error::Channel {
            channel: channel.to_string(),
            source: Box::new(self),
        }
    }
}
