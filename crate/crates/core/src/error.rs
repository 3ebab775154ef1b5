use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A numeric input was non-finite or outside its domain.
    #[error("invalid input: {0}")]
    Input(String),

    /// Inconsistent configuration (dimensions, laws, counts).
    #[error("configuration error: {0}")]
    Config(String),

    /// Operation not allowed in the current state of the object.
    #[error("state error: {0}")]
    State(String),

    /// The integrator gave up; `last_time` is the last accepted time.
    #[error("integration failed at t = {last_time}: {reason}")]
    Integration { last_time: f64, reason: String },

    /// Trajectory-level integration failure.
    #[error("trajectory {index}: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// Failure inside a dense factorization or a metric that cannot be formed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
