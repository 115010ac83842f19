use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: line {line}: {message}")]
    Parse {
        context: String,
        line: usize,
        message: String,
    },

    #[error("point count mismatch: header declares {declared}, found {found}")]
    PointCountMismatch { declared: usize, found: usize },

    #[error("no points")]
    NoPoints,

    #[error("landmark count mismatch: expected {expected}, found {found}")]
    LandmarkCountMismatch { expected: usize, found: usize },

    #[error("non-finite coordinate at point {index}")]
    NonFinite { index: usize },

    #[error("unknown label {label:?}; expected one of: anger, contempt, disgust, fear, happiness, sadness, surprise")]
    UnknownLabel { label: String },

    #[error("duplicate example id {0:?}")]
    DuplicateId(String),

    #[error("no examples")]
    NoExamples,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("empty training set")]
    EmptyInput,

    #[error("training data contains a single class")]
    SingleClass,

    #[error("model was trained without calibration")]
    Uncalibrated,

    #[error("class {class} has {count} examples, at least {needed} required")]
    ClassTooSmall {
        class: String,
        count: usize,
        needed: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model file: {0}")]
    Model(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        context: impl Into<String>,
        line: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            context: context.into(),
            line,
            message: message.into(),
        }
    }

    /// Whether the error stems from user input (files, arguments) rather
    /// than a failure inside the numerical pipeline.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::SingleClass | Error::EmptyInput | Error::Uncalibrated
        )
    }
}
