use thiserror::Error;

/// Errors raised by the simulation and numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("regime mismatch: {0}")]
    Regime(String),

    #[error("quadrature did not reach tolerance: estimate {estimate:e} > tolerance {tolerance:e} ({context})")]
    Quadrature {
        estimate: f64,
        tolerance: f64,
        context: String,
    },

    #[error("closed form and quadrature disagree by {difference:e} (tolerance {tolerance:e}): {context}")]
    Disagreement {
        difference: f64,
        tolerance: f64,
        context: String,
    },

    #[error("truncation bound {bound:e} exceeds tolerance {tolerance:e}")]
    Truncation { bound: f64, tolerance: f64 },

    #[error("cost guard: {0}")]
    CostGuard(String),

    #[error("fit failed: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
