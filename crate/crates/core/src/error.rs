use thiserror::Error;

/// Errors raised by the simulation library.
///
/// The variants fall into three families that the command-line front end maps
/// onto distinct exit codes: configuration problems, numerical failures and
/// I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("critical field is undefined for zero flux")]
    UndefinedCriticalField,

    #[error("no transporting states: field {field} is not below the critical field {critical}")]
    NoTransportingStates { field: f64, critical: f64 },

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("wave packet left the y-window: weight {weight:.3e} within {margin} sites of the edge")]
    WindowEscape { weight: f64, margin: usize },

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("integration error: {0}")]
    Integration(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by invalid user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Dimension { .. }
                | Error::UndefinedCriticalField
                | Error::NoTransportingStates { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
