use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: malformed record: {reason}")]
    Malformed {
        file: String,
        line: usize,
        reason: String,
    },

    #[error("{file}:{line}: duplicate rating for user {user} on item {item}")]
    DuplicateRating {
        file: String,
        line: usize,
        user: String,
        item: String,
    },

    #[error("{file}:{line}: rating references unknown {kind} id {id}")]
    UnknownReference {
        file: String,
        line: usize,
        kind: &'static str,
        id: String,
    },

    #[error("{count} malformed JSON line(s) in {file} (strict mode)")]
    MalformedJson { file: String, count: usize },

    #[error("empty cohort: {0}")]
    EmptyCohort(String),

    #[error("unknown category label {0:?}")]
    UnknownCategory(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("user {user} has {count} interactions, fewer than k = {k} folds")]
    TooFewInteractions { user: usize, count: usize, k: usize },

    #[error("training diverged at epoch {epoch} (learn_rate = {learn_rate}): non-finite loss")]
    Diverged { epoch: usize, learn_rate: f64 },

    #[error("unsupported hyperparameters for {algorithm}: {reason}")]
    UnsupportedHyper { algorithm: String, reason: String },

    #[error("preference ratio undefined: selection has no entries")]
    UndefinedPreferenceRatio,

    #[error("category prior is zero")]
    ZeroPrior,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("{0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serde(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the name of the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
