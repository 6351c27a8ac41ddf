use thiserror::Error;

/// Errors surfaced by builders, loaders and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate rating for user {user}, item {item}")]
    DuplicateEntry { user: usize, item: usize },
    #[error("rating {value} outside 1..={max}")]
    RatingOutOfRange { value: i64, max: u8 },
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("loss {0:?} has no derivative")]
    NonDifferentiable(&'static str),
    #[error("invalid argument for divergence: {0}")]
    DomainError(String),
    #[error("stage {stage} outside 1..={max}")]
    StageOutOfRange { stage: usize, max: usize },
    #[error("rating matrix has no observed entries")]
    NoObservedEntries,
    #[error("need at least {need} instances, got {got}")]
    TooFewInstances { need: usize, got: usize },
    #[error("requested {k} groups but only {labels} labels")]
    KTooLarge { k: usize, labels: usize },
    #[error("linear system is singular; increase regularization")]
    SingularSystem,
    #[error("gram matrix singular after {0} retries")]
    SingularGram(usize),
    #[error("model is empty: {0}")]
    EmptyModel(&'static str),
    #[error("user has no ratings to fold in")]
    EmptyRatings,
    #[error("empty truth set")]
    EmptyTruth,
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{features} feature rows vs {labels} label rows")]
    RowCountMismatch { features: usize, labels: usize },
    #[error("non-binary label value {value} at {path}:{line}")]
    NonBinaryLabel {
        path: String,
        line: usize,
        value: f64,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
