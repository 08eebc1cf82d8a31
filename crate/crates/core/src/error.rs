use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty point set")]
    EmptyPointSet,

    #[error("invalid convex weights: {0}")]
    InvalidConvexWeights(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("too few points for reduction: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("rank-deficient data: {0}")]
    RankDeficient(String),

    #[error("numeric overflow in {0}")]
    NumericOverflow(&'static str),

    #[error("training diverged at epoch {epoch}, segment {segment}: loss = {loss}")]
    Divergence { epoch: usize, segment: usize, loss: f64 },

    #[error("no measurements")]
    NoMeasurements,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: file is not valid UTF-8")]
    Decode { path: PathBuf },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Tags the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage { stage: stage.into(), source: Box::new(self) }
    }

    /// Whether the failure comes from the numerics rather than from inputs.
    pub fn is_numeric(&self) -> bool {
        if let Error::Stage { source, .. } = self {
            return source.is_numeric();
        }
        matches!(
            self,
            Error::NonFinite(_) | Error::RankDeficient(_) | Error::NumericOverflow(_) | Error::Divergence { .. }
        )
    }
}
