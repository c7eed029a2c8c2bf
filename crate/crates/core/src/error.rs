use thiserror::Error;

/// Failure modes shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("norm drift {drift:.3e} exceeds tolerance (step bound too loose)")]
    NormDrift { drift: f64 },

    #[error("pulse schedule has no segments")]
    EmptySchedule,

    #[error("phase undefined at t = {time}: overlap with the initial state is {overlap:.3e}")]
    UndefinedPhase { time: f64, overlap: f64 },

    #[error("phase jump of {jump:.4} rad at t = {time} exceeds the unwrap limit (undersampled)")]
    Undersampled { time: f64, jump: f64 },

    #[error("geometric phase routes disagree by {disagreement:.3e} rad")]
    CrossCheck { disagreement: f64 },

    #[error("trajectory carries no Hamiltonian snapshots")]
    MissingHamiltonian,

    #[error("target not reachable: {0}")]
    Unreachable(String),

    #[error("control field singular at t = {time}")]
    SingularControl { time: f64 },

    #[error("frame transform is not unitary at t = {time} (deviation {deviation:.3e})")]
    NonUnitary { time: f64, deviation: f64 },

    #[error("density matrix lost positivity: eigenvalue {eigenvalue:.3e} at t = {time}")]
    Positivity { time: f64, eigenvalue: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that come out of the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NormDrift { .. }
                | Error::UndefinedPhase { .. }
                | Error::Undersampled { .. }
                | Error::CrossCheck { .. }
                | Error::SingularControl { .. }
                | Error::Positivity { .. }
                | Error::NonUnitary { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
