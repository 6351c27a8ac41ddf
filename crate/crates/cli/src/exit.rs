//! Error-to-exit-code mapping: 1 config, 2 data, 3 numerical.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numerical => 3,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl From<mf_core::Error> for CliError {
    fn from(e: mf_core::Error) -> Self {
        use mf_core::Error::*;
        let kind = match &e {
            DuplicateEntry { .. } | RatingOutOfRange { .. } | IndexOutOfRange(_) | Parse { .. }
            | RowCountMismatch { .. } | NonBinaryLabel { .. } | Io { .. } | EmptyTruth
            | TooFewInstances { .. } => ErrorKind::Data,
            SingularSystem | SingularGram(_) | NoObservedEntries | NonDifferentiable(_)
            | DomainError(_) | EmptyModel(_) | EmptyRatings => ErrorKind::Numerical,
            DimensionMismatch(_) | StageOutOfRange { .. } | KTooLarge { .. } => ErrorKind::Config,
        };
        CliError::new(kind, e.to_string())
    }
}
