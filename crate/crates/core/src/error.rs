use thiserror::Error;

/// Errors raised across the library. Each variant maps onto one CLI exit code.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("argument error: {0}")]
    Argument(String),

    /// An input sits on (or numerically next to) a root hyperplane.
    #[error("degenerate input: {what} is singular on root hyperplane {root} (value {value:e})")]
    Degenerate { what: String, root: String, value: f64 },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("quadrature did not converge: {0}")]
    Resolution(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Degenerate { .. } => 2,
            Error::Numerical(_) | Error::Resolution(_) => 3,
            Error::Config(_) | Error::Argument(_) | Error::Resource(_) => 64,
        }
    }
}
