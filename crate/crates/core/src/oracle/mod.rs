//! The placement program in executable form: a constraint checker, the
//! objective and an exact solver for small instances.

mod check;
mod instances;
mod objective;
mod search;

pub use check::{check_constraints, validate_structure, Constraint, Violation, ViolationReport};
pub use instances::{random_instance, InstanceDims};
pub use objective::{objective_value, ObjectiveBreakdown};
pub use search::{estimate_log10_size, solve_exact, Solution, SolverLimits};

use crate::model::ModelError;
use crate::trace::TraceError;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("malformed trace: {0}")]
    Structure(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("search budget of {0} visits exhausted")]
    Budget(u64),
}

impl From<TraceError> for OracleError {
    fn from(e: TraceError) -> Self {
        OracleError::Structure(e.to_string())
    }
}

#[cfg(test)]
mod tests;
