use thiserror::Error;

/// Errors raised by the library.
///
/// Variants are grouped by [`ErrorKind`] so front ends can map them onto
/// exit statuses without matching every case.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("training set too small: need at least {needed} shots, found {found}")]
    TrainingSize { needed: usize, found: usize },

    #[error("incomplete panel: {0}")]
    IncompletePanel(String),

    #[error("unknown expert `{0}`")]
    UnknownExpert(String),

    #[error("empty panel")]
    EmptyPanel,

    #[error("trial set needs both genuine and impostor trials")]
    SingleClass,

    #[error("expert #{index} failed: {message}")]
    Evaluator { index: usize, message: String },

    #[error("unsupported format: {0}")]
    Unsupported(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification of an [`Error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or unsupported input data.
    Data,
    /// A numeric precondition or invariant did not hold.
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Dimension(_)
            | Error::Invariant(_)
            | Error::TrainingSize { .. }
            | Error::InvalidParameter(_)
            | Error::SingleClass
            | Error::Evaluator { .. } => ErrorKind::Numeric,
            Error::IncompletePanel(_)
            | Error::UnknownExpert(_)
            | Error::EmptyPanel
            | Error::Unsupported(_)
            | Error::Format(_)
            | Error::Io(_) => ErrorKind::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
