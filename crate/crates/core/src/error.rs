use thiserror::Error;

use crate::equilibrium::DynamicsTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scenario document or parameter violates an invariant. `path` names
    /// the offending field, e.g. `evs[2].b_lo`.
    #[error("invalid {path}: {message}")]
    Validation { path: String, message: String },

    #[error("more than {cap} simple paths from {from} to {to}")]
    PathExplosion { from: String, to: String, cap: usize },

    #[error("best-response dynamics did not converge within {} rounds", .0.rounds)]
    NotConverged(Box<DynamicsTrace>),

    #[error("{what} did not converge")]
    NoConvergence { what: String },

    #[error("enumeration needs {needed} evaluations, budget is {budget}")]
    BudgetExceeded { needed: f64, budget: u64 },

    #[error("pricing exponent {exponent} is not supported here (quadratic pricing required)")]
    UnsupportedPricing { exponent: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no Nash equilibrium found")]
    NoNeFound,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { path: path.into(), message: message.into() }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation { .. } | Error::Json(_) => 2,
            Error::BudgetExceeded { .. } | Error::PathExplosion { .. } => 3,
            _ => 1,
        }
    }
}
