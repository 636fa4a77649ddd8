use thiserror::Error;

/// Every failure the toolkit can report.
///
/// Input problems map to process exit code 2, numerical problems to 3.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid market shares: {0}")]
    Share(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid base covariance: {0}")]
    Covariance(String),
    #[error("invalid value: {0}")]
    Value(String),
    #[error("invalid plan index: {0}")]
    Index(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("no accepted example after {trials} trials")]
    SearchExhausted { trials: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable code used in CLI error objects.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Share(_) => "shares",
            Error::Dimension(_) => "dimension",
            Error::Covariance(_) => "covariance",
            Error::Value(_) => "value",
            Error::Index(_) => "index",
            Error::Grid(_) => "grid",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Numerical(_) => "numerical",
            Error::Factorization(_) => "factorization",
            Error::SearchExhausted { .. } => "search_exhausted",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::Factorization(_) | Error::SearchExhausted { .. } => 3,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
