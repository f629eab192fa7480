use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: record {index}: {message}")]
    Schema {
        path: PathBuf,
        index: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("empty embedding table")]
    EmptyEmbeddings,

    #[error("no scores for question ids {0:?}")]
    MissingScores(Vec<u64>),

    #[error("score shape mismatch for question {question_id}: {message}")]
    ScoreShape { question_id: u64, message: String },

    #[error("predictions reference question ids absent from annotations: {0:?}")]
    MissingAnnotations(Vec<u64>),

    #[error("expected 10 human answers, got {0}")]
    AnswerCount(usize),

    #[error("prediction files share no question ids")]
    EmptyOverlap,

    #[error("backend error: {0}")]
    Backend(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command line tool: 1 usage, 2 data, 3 backend.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Backend(_) => 3,
            _ => 2,
        }
    }
}
