use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("normal equations are ill-conditioned (condition estimate {condition:.3e}); use a positive ridge penalty")]
    IllConditioned { condition: f64 },

    #[error("unsupported format version {found} (this build reads version {expected})")]
    Version { found: u64, expected: u64 },

    #[error("unexpected model type `{found}` (expected `{expected}`)")]
    ModelType { found: String, expected: String },

    #[error("truncated document: {0}")]
    Truncated(String),

    #[error("dimension inconsistency: {0}")]
    DimensionInconsistency(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("line {line}: malformed record: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("line {line}: dimension inconsistency: {message}")]
    LineDimension { line: usize, message: String },

    #[error("line {line}: point outside the unit cube: {message}")]
    OutOfRange { line: usize, message: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("unknown method `{name}` (known methods: {known})")]
    UnknownMethod { name: String, known: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by the caller's input rather than a fault in
    /// this library.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Io(e) if e.kind() != std::io::ErrorKind::NotFound
            && e.kind() != std::io::ErrorKind::PermissionDenied)
    }
}
