use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error categories used across the crate. The category name is stable and
/// machine-parsable (`parse`, `validation`, `argument`, `state`, `size`).
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse: {0}")]
    Parse(String),
    #[error("validation: {0}")]
    Validation(String),
    #[error("argument: {0}")]
    Argument(String),
    #[error("state: {0}")]
    State(String),
    #[error("size: {0}")]
    Size(String),
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::Validation(_) => "validation",
            Error::Argument(_) => "argument",
            Error::State(_) => "state",
            Error::Size(_) => "size",
        }
    }
}
