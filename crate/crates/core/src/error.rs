use alloc::string::String;

/// Errors raised by basis construction, transforms, the integrator and the verifiers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("grid resolution {given} is below the required {required} nodes per axis")]
    Resolution { required: usize, given: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("ratio undefined for the zero state")]
    ZeroState,
    #[error("non-finite state encountered at t = {time}")]
    Divergence { time: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
