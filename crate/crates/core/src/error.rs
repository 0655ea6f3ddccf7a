use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("unknown spec id `{0}`")]
    UnknownSpec(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Domain(_) => "domain",
            Error::Evaluation(_) => "evaluation",
            Error::Numerical(_) => "numerical",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Infeasible(_) => "infeasible",
            Error::UnknownSpec(_) => "unknown_spec",
            Error::Io(_) => "io",
        }
    }

    /// True for errors caused by invalid input rather than numerical failure.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Parameter(_) | Error::Domain(_) | Error::UnknownSpec(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
