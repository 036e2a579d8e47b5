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

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("line {line}: duplicate document id `{id}`")]
    DuplicateId { id: String, line: usize },

    #[error("only {found} candidate label(s) occur in the corpus, {needed} classes requested")]
    TooFewLabels { found: usize, needed: usize },

    #[error("class `{class}` has {size} member(s), minimum is {min}")]
    ClassTooSmall { class: String, size: usize, min: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("vocabulary is empty after removing terms that occur in a single document")]
    EmptyVocabulary,

    #[error("feature selection kept no terms: {0}")]
    EmptySelection(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cosine distance is undefined for a zero vector")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("k = {k} exceeds the number of distinct vectors ({distinct})")]
    TooFewDistinct { k: usize, distinct: usize },

    #[error("silhouette needs at least two clusters")]
    SingleCluster,

    #[error("id sets differ: missing from truth {missing:?}, missing from predictions {extra:?}")]
    IdMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the name of the pipeline stage it came from.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with stage annotations peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
