use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("generation exhausted after {restarts} restarts (n={n}, k={k})")]
    GenerationExhausted { n: usize, k: usize, restarts: usize },
    #[error("graph is not connected")]
    NotConnected,
    #[error("graph too large: n={n} exceeds the cap of {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("degenerate spectrum: need at least two eigenvalues, got {0}")]
    DegenerateSpectrum(usize),
    #[error("invalid spectrum: |lambda1| = {lambda1} exceeds k = {k}")]
    InvalidSpectrum { k: usize, lambda1: f64 },
    #[error("division by zero: true value must be positive, got {0}")]
    DivisionByZero(f64),
    #[error("rank-deficient design matrix")]
    RankDeficient,
    #[error("arity mismatch: expected {expected} inputs, got {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("invalid layer dimensions {0:?}")]
    InvalidDims(Vec<usize>),
    #[error("non-finite parameter in layer {layer}")]
    NonFiniteParameter { layer: usize },
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("empty candidate list")]
    EmptyList,
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("no records for n={0}")]
    MissingSize(usize),
    #[error("record (n={n}, k={k}, index={index}): {source}")]
    Record {
        n: usize,
        k: usize,
        index: u64,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
