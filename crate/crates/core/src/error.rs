use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::registry::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A syntax or structure error in one of the line-oriented input formats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// File name, when the text came from a file.
    pub file: Option<String>,
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            file: None,
            line,
            message: message.into(),
        }
    }

    pub fn in_file(mut self, file: impl Into<String>) -> Self {
        self.file = Some(file.into());
        self
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.file {
            Some(file) => write!(f, "{}:{}: {}", file, self.line, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("crosswalk failed validation with {} error(s)", .0.error_count())]
    Validation(ValidationReport),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown instrument version {instrument} / {version}")]
    UnknownInstrument { instrument: String, version: String },

    #[error("question {question_id} does not exist in {instrument} / {version}")]
    UnknownQuestion {
        instrument: String,
        version: String,
        question_id: String,
    },

    #[error("choice {choice} out of range for {instrument} / {version} question {question_id} ({choices} choices)")]
    ChoiceOutOfRange {
        instrument: String,
        version: String,
        question_id: String,
        choice: u32,
        choices: usize,
    },

    #[error("unknown placeholder {0} in question template")]
    UnknownPlaceholder(String),

    #[error("unknown Rosetta question {0}")]
    UnknownRosetta(String),

    #[error("nothing to merge")]
    EmptyMerge,

    #[error("vectors for different subjects cannot be merged ({0} vs {1})")]
    SubjectMismatch(String, String),

    #[error("subject {0} has no label")]
    Unlabeled(String),

    #[error("subject {subject} labeled both {first} and {second}")]
    ConflictingLabel {
        subject: String,
        first: String,
        second: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("labels contain a single class")]
    SingleClass,

    #[error("no features to train on")]
    NoFeatures,

    #[error("model has not been fitted")]
    Unfitted,

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),

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
}
