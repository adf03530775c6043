use std::path::PathBuf;

/// Errors produced by ingestion, rendering and training.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("truncated record in {file}: {detail}")]
    Truncated { file: String, detail: String },

    #[error("malformed {file}: {detail}")]
    Malformed { file: String, detail: String },

    #[error("unsupported camera model `{0}` (expected PINHOLE, SIMPLE_PINHOLE or SIMPLE_RADIAL)")]
    UnsupportedCameraModel(String),

    #[error("degenerate parameter: {0}")]
    DegenerateParameter(String),

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty point cloud: {0}")]
    EmptyCloud(String),

    #[error("not enough views: need at least {needed}, found {found}")]
    NotEnoughViews { needed: usize, found: usize },

    #[error("image of {width}x{height} is smaller than the {window}x{window} SSIM window")]
    ImageTooSmall {
        width: usize,
        height: usize,
        window: usize,
    },

    #[error("render intermediates do not match: {0}")]
    MismatchedIntermediates(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite loss at iteration {iteration}: {detail}")]
    NonFiniteLoss { iteration: usize, detail: String },

    #[error("image decode error for {path}: {message}")]
    Image { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
