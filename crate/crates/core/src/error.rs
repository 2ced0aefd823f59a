use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent dimensions, shapes or parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// An iterate picked up a NaN or infinity.
    #[error("numerical divergence at iteration {iter}: non-finite value in {what}")]
    Divergence { iter: usize, what: &'static str },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Step-length constants do not satisfy a required strict inequality.
    #[error("infeasible constants: {inequality} violated ({detail})")]
    Infeasible { inequality: &'static str, detail: String },

    /// The problem does not expose what an oracle needs.
    #[error("unsupported oracle: {0}")]
    Unsupported(&'static str),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
