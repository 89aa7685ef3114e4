use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An input is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A pattern quantity (beamwidth, sidelobe) could not be measured.
    #[error("measurement error: {0}")]
    Measurement(String),
    /// A request would need an unreasonable amount of memory or time.
    #[error("resource error: {0}")]
    Resource(String),
    /// A requested operation would destroy the main beam.
    #[error("rejected: {0}")]
    Rejected(String),
    /// Models or matrices that must agree do not.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! domain {
    ($($arg:tt)*) => { $crate::error::Error::Domain(alloc::format!($($arg)*)) };
}
macro_rules! measurement {
    ($($arg:tt)*) => { $crate::error::Error::Measurement(alloc::format!($($arg)*)) };
}
pub(crate) use domain;
pub(crate) use measurement;
