use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid code: {0}")]
    Code(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("invalid data file: {0}")]
    Data(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn shape_err(what: &str, expected: usize, got: usize) -> Error {
    Error::Shape {
        expected: format!("{what} = {expected}"),
        got: got.to_string(),
    }
}
