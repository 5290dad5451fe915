use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("registration error: {0}")]
    Registration(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("point cloud is empty: sample has no valid 3D points")]
    EmptyCloud,

    #[error("foreground is empty after background removal")]
    EmptyForeground,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("plane fit failed: every sampled triple was collinear")]
    FitFailure,

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

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

    /// Process exit code used by the CLI: 2 config, 3 data, 4 metric-undefined.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Argument(_) => 2,
            Error::UndefinedMetric(_) => 4,
            _ => 3,
        }
    }
}
