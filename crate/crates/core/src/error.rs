use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("sample rate mismatch: expected {expected} Hz, got {found} Hz")]
    RateMismatch { expected: u32, found: u32 },
    #[error("insufficient noise: need {needed} samples, have {available}")]
    InsufficientNoise { needed: usize, available: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("degenerate labels: need at least one positive and one negative frame ({n_pos} positive, {n_neg} negative)")]
    DegenerateLabels { n_pos: usize, n_neg: usize },
    #[error("manifest error at entry {entry}: {message}")]
    Manifest { entry: String, message: String },
    #[error("window too small: fraction {fraction} of {frames} frames holds no frame")]
    WindowTooSmall { fraction: f64, frames: usize },
    #[error("training diverged at epoch {epoch}, chunk {chunk}: non-finite loss")]
    Divergence { epoch: usize, chunk: usize },
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
