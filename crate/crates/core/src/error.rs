use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the classification engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate name in taxonomy: {0:?}")]
    DuplicateName(String),
    #[error("taxonomy is empty or contains an empty group")]
    EmptyTaxonomy,
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("index out of range: {what} {index} (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("empty input")]
    EmptyInput,
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },
    #[error("non-finite activation in {0}")]
    NonFiniteActivation(&'static str),

    #[error("label out of range: {0}")]
    LabelOutOfRange(String),
    #[error("inconsistent labels: {0}")]
    InconsistentLabels(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    DivergedTraining { epoch: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty track")]
    EmptyTrack,
    #[error("invalid threshold {0}: must lie in [0, 1 + 1e-9]")]
    InvalidThreshold(f64),
    #[error("empty evaluation set")]
    EmptyEvalSet,
    #[error("model was trained for a different taxonomy")]
    TaxonomyMismatch,

    #[error("infeasible generator config: {0}")]
    InfeasibleConfig(String),
    #[error("species {0:?} has fewer than 2 tracks")]
    SpeciesTooSmall(String),
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: inconsistent labels for track {track_id:?}")]
    InconsistentTrackLabels { line: usize, track_id: String },
    #[error("line {line}: feature dimension mismatch")]
    RecordDimensionMismatch { line: usize },

    #[error("i/o failure on {path:?}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoFailure {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
