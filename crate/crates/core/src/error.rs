use thiserror::Error;

/// Errors raised by the model-checking library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input is well-formed but carries no usable information (zero variance, rank deficiency).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    /// Every particle weight vanished at time index `time` (zero-based).
    #[error("particle system degenerated at t = {time}: {detail}")]
    Degeneracy { time: usize, detail: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A failure inside the Monte Carlo loop, annotated with the parameter draw index.
    #[error("parameter draw {index}: {source}")]
    Draw {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
