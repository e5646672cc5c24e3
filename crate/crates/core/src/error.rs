use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing model for {0}")]
    MissingModel(&'static str),

    #[error("feature config mismatch: model expects {expected}, got {actual}")]
    ConfigMismatch { expected: String, actual: String },

    #[error("training data: {0}")]
    TrainingData(String),

    #[error("{path}:{line}: {message}")]
    Corpus {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unsupported schema version {found} in {what} (expected {expected})")]
    SchemaVersion {
        what: String,
        found: u32,
        expected: u32,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::MissingModel(_) => "missing_model",
            Error::ConfigMismatch { .. } => "config_mismatch",
            Error::TrainingData(_) => "training_data",
            Error::Corpus { .. } => "corpus",
            Error::SchemaVersion { .. } => "schema_version",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
