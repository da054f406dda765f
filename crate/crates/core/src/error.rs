use std::path::PathBuf;

use thiserror::Error;

use crate::trainer::Checkpoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty vector")]
    EmptyVector,

    #[error("non-finite input")]
    NonFiniteInput,

    #[error("zero-norm vector")]
    ZeroNorm,

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("non-finite gradient")]
    NonFiniteGradient,

    #[error("step beyond horizon: step {step} > total {total}")]
    StepBeyondHorizon { step: u64, total: u64 },

    #[error("patch grid mismatch: grid {grid} is not divisible by patch {patch}")]
    PatchGridMismatch { grid: usize, patch: usize },

    #[error("no tokens")]
    NoTokens,

    #[error("out-of-vocabulary token id {id} (vocabulary size {vocab})")]
    OutOfVocab { id: u32, vocab: usize },

    #[error("insufficient sample: need at least 2 entries per side, got {visual} and {text}")]
    InsufficientSample { visual: usize, text: usize },

    #[error("sample id {0} cannot be resolved")]
    UnknownSample(u64),

    #[error("non-finite loss component: {0}")]
    NonFiniteComponent(&'static str),

    #[error("zero rank variance")]
    ZeroRankVariance,

    #[error("zero variance")]
    ZeroVariance,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),

    #[error("numerical abort at iteration {iteration}: {reason}")]
    NumericalAbort {
        iteration: u64,
        reason: String,
        /// State before the failing step.
        last_good: Box<Checkpoint>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(left: &[usize], right: &[usize]) -> Self {
        Error::ShapeMismatch {
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }
}
