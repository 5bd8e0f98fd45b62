use alloc::string::String;

/// Errors raised by the numeric core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Inconsistent shapes, geometry or hyperparameters.
    #[error("configuration error: {0}")]
    Config(String),
    /// Input data outside its valid domain (pixel range, labels, empty sets).
    #[error("input error: {0}")]
    Input(String),
    /// Neuron state outside its valid domain.
    #[error("state error: {0}")]
    State(String),
    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    /// Loss became non-finite.
    #[error("training diverged: {0}")]
    Diverged(String),
    /// An in-loop invariant failed.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(alloc::format!($($arg)*)) };
}
macro_rules! input_err {
    ($($arg:tt)*) => { $crate::error::Error::Input(alloc::format!($($arg)*)) };
}
pub(crate) use config_err;
pub(crate) use input_err;
