use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("operator is not Hermitian (max |H - H†| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid qubit positions: {0}")]
    InvalidPositions(String),

    #[error("norm drift {drift:e} at t = {time:e} exceeds tolerance; reduce the step size")]
    NormDrift { drift: f64, time: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("register of {qubits} qubits exceeds the expansion limit of {limit}")]
    TooManyQubits { qubits: usize, limit: usize },

    #[error("unsupported measurement: {0}")]
    UnsupportedMeasurement(String),

    #[error("phase correction applies only to single-excitation success residuals: {0}")]
    NotSuccessBranch(String),

    #[error("malformed outcome: {0}")]
    MalformedOutcome(String),

    #[error("target size {0} is unreachable")]
    Unreachable(usize),

    #[error("strategy never produces the target: {0}")]
    NonTerminating(String),
}

impl Error {
    /// True for failures of the numerics themselves, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NormDrift { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
