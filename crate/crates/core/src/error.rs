use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {name} = {value} ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// A configuration value violates an invariant of its type.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("simulation requested with zero pulses")]
    EmptyTally,

    /// A setting needed for the analysis has no recorded pulses.
    #[error("missing data for setting `{0}`")]
    MissingSetting(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            expected,
        }
    }
}
