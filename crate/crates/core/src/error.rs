use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// Variants fall into three classes that map onto CLI exit codes:
/// input validation (1), numerical failure (2) and resource caps (3).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error(
        "precision exhausted at {bits} bits: error bound {error_bound:.3e} exceeds requested accuracy {accuracy:.3e}"
    )]
    PrecisionExhausted {
        bits: u32,
        error_bound: f64,
        accuracy: f64,
    },

    #[error("integral diverges: term with rate 0 and power {power} has nonzero coefficient")]
    Divergent { power: u32 },

    #[error("lattice of {states} states exceeds the cap of {cap}; use the stochastic simulator instead")]
    LatticeCap { states: u128, cap: u128 },

    #[error("population table does not cover the full lattice")]
    IncompleteTable,

    #[error("integrator failed at t = {t:.6e}: {reason} (error estimate {estimate:.3e})")]
    Integrator { t: f64, reason: String, estimate: f64 },

    #[error("state not stationary at t_end = {t_end:.6e} (residual {residual:.3e}); increase the horizon")]
    Horizon { t_end: f64, residual: f64 },

    #[error("Fock cutoff {cutoff} inadequate: tail population {tail:.3e} at t = {t:.4e}")]
    CutoffInadequate { cutoff: usize, tail: f64, t: f64 },

    #[error("state dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("{failures} verification check(s) failed")]
    VerificationFailed { failures: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::IncompleteTable | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
            Error::PrecisionExhausted { .. }
            | Error::Divergent { .. }
            | Error::Integrator { .. }
            | Error::Horizon { .. }
            | Error::CutoffInadequate { .. }
            | Error::NonConvergence { .. }
            | Error::VerificationFailed { .. } => 2,
            Error::LatticeCap { .. } | Error::DimensionCap { .. } => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
