use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input data, files, or configuration.
    Data,
    /// Numerical failure during training or evaluation.
    Numeric,
}

/// Pipeline stage that produced an error inside an experiment run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Split,
    Support,
    Adaptation,
    Classifier,
    Evaluation,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Split => "split",
            Stage::Support => "support sampling",
            Stage::Adaptation => "adaptation",
            Stage::Classifier => "classifier training",
            Stage::Evaluation => "evaluation",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector norm {norm:e} is too small to normalize")]
    ZeroNorm { norm: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("no anchor in the batch has a positive")]
    NoPositives,
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("truncated file: {0}")]
    TruncatedFile(String),
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("unknown language {0:?}")]
    UnknownLanguage(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty split: {0}")]
    EmptySplit(String),
    #[error("results were computed on different test splits")]
    MismatchedSplit,
    #[error("split leakage: {0}")]
    Leakage(String),
    #[error("no counterpart for {0}")]
    MissingCounterpart(String),
    #[error("store hash mismatch: {0} vs {1}")]
    StoreHashMismatch(String, String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("manifest: {0}")]
    Manifest(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::ZeroNorm { .. }
            | Error::NonFinite(_)
            | Error::NonFiniteLoss { .. }
            | Error::NoPositives => ErrorKind::Numeric,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn at(stage: Stage) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}
