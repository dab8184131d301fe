use alloc::string::String;

/// Failure modes shared by every module of the core crate.
///
/// The variants line up with the exit-code classes used by the command-line
/// harness, so callers can map them without inspecting messages.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A vector or matrix had the wrong length, or a model dimension was zero
    /// or overflowed.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// An operation was called in a state where it is not defined.
    #[error("state error: {0}")]
    State(String),
    /// Cache slots were appended out of original-position order.
    #[error("ordering error: {0}")]
    Ordering(String),
    /// A configuration value violates a precondition.
    #[error("configuration error: {0}")]
    Config(String),
    /// Malformed or insufficient input data.
    #[error("input error: {0}")]
    Input(String),
    /// Requested decomposition depth does not fit the signal.
    #[error("level error: {0}")]
    Level(String),
    /// A wavelet band selector does not name an existing band.
    #[error("selector error: {0}")]
    Selector(String),
    /// An internal invariant did not hold. Always a bug.
    #[error("invariant violation: {0}")]
    Invariant(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
