use alloc::string::String;

/// Errors surfaced by the decoding pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("stream is empty: {0}")]
    EmptyStream(String),
    #[error("window too short: {len} samples (need at least {min})")]
    WindowTooShort { len: usize, min: usize },
    #[error("missing data: {0}")]
    MissingData(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("aligned streams have zero common length")]
    EmptyAlignment,
    #[error("run too short: {0} packets (need at least 4)")]
    RunTooShort(usize),
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::UndefinedMetric(_))
    }
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$variant(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
