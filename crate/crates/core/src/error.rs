use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Fixed constants that would make some element of the behavioural
    /// adaptation vector non-positive, or otherwise out of domain.
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),
    /// Reconstructed compartment count went negative.
    #[error("infeasible event configuration: stratum {stratum}, day {day}")]
    Infeasible { stratum: usize, day: usize },
    #[error("latent initialisation failed: {0}")]
    Initialization(String),
}

impl Error {
    /// Short machine-readable category, used by the command line front end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::InvalidConfiguration(_) => "invalid-configuration",
            Error::InvalidState(_) => "invalid-state",
            Error::InvalidScenario(_) => "invalid-scenario",
            Error::InvalidSpec(_) => "invalid-spec",
            Error::Infeasible { .. } => "infeasible",
            Error::Initialization(_) => "initialization",
        }
    }
}

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$variant(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
