use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown system id `{0}`")]
    UnknownSystem(String),

    #[error("system `{system}` is missing parameter `{param}`")]
    MissingParameter { system: &'static str, param: String },

    #[error("system `{system}` does not take parameter `{param}`")]
    UnknownParameter { system: &'static str, param: String },

    #[error("parameter `{param}` must be finite, got {value}")]
    NonFiniteParameter { param: String, value: f64 },

    #[error("state has dimension {got}, system expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operation not supported for system `{0}`")]
    Unsupported(&'static str),

    #[error("solution blows up at t = {blow_up_time}")]
    BlowUp { blow_up_time: f64 },

    #[error("{0}")]
    InvalidInput(String),

    #[error("bad magic: expected `LDF1`, found {found:?}")]
    MagicMismatch { found: [u8; 4] },

    #[error("unsupported field file version {found} (this build reads version {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("field file truncated: {0}")]
    Truncated(String),

    #[error("malformed field file: {0}")]
    Malformed(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("png encoding failed: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
