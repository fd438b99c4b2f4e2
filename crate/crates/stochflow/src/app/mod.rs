//! Command-line front end: configuration, scenarios, runs and the self-test.
//!
//! Exit codes used by the `stochflow` binary: 0 success, 1 runtime failure
//! (I/O, singular systems, failed self-test checks), 2 invalid input
//! (configuration, mesh, curves), 3 Newton non-convergence, 64 usage.

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::fields::FieldError;
use crate::kelvin::KelvinError;
use crate::mesh::MeshError;

pub mod config;
pub mod run;
pub mod scenario;
pub mod selftest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("configuration: {0}")]
    Config(#[from] config::ConfigError),
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("scenario: {0}")]
    Scenario(#[from] FieldError),
    #[error("curve {id}: {source}")]
    Curve { id: usize, source: KelvinError },
    #[error("solver: {0}")]
    Dynamics(#[from] DynamicsError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    SelfTest(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::Mesh(_) | AppError::Scenario(_) => EXIT_INVALID,
            AppError::Curve { source, .. } => match source {
                KelvinError::LinearSolve(_) => EXIT_FAILURE,
                _ => EXIT_INVALID,
            },
            AppError::Dynamics(e) => dynamics_code(e),
            AppError::Io { .. } | AppError::SelfTest(_) => EXIT_FAILURE,
        }
    }
}

fn dynamics_code(e: &DynamicsError) -> i32 {
    match e {
        DynamicsError::NonConvergence { .. } => EXIT_NONCONVERGENCE,
        DynamicsError::InvalidConfig(_) | DynamicsError::MeshMismatch(_) | DynamicsError::DegenerateDual(_) => {
            EXIT_INVALID
        }
        DynamicsError::AtStep { source, .. } => dynamics_code(source),
        _ => EXIT_FAILURE,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let nc = DynamicsError::NonConvergence { iterations: 3, residual: 1.0 };
        let wrapped = DynamicsError::AtStep { step: 4, source: Box::new(nc.clone()) };
        assert_eq!(AppError::Dynamics(nc).exit_code(), EXIT_NONCONVERGENCE);
        assert_eq!(AppError::Dynamics(wrapped).exit_code(), EXIT_NONCONVERGENCE);
        assert_eq!(AppError::Dynamics(DynamicsError::SingularJacobian("x".into())).exit_code(), EXIT_FAILURE);
        assert_eq!(AppError::Mesh(MeshError::InvalidGrid("x".into())).exit_code(), EXIT_INVALID);
        let curve = AppError::Curve { id: 0, source: KelvinError::OpenLoop { first: 0, last: 1 } };
        assert_eq!(curve.exit_code(), EXIT_INVALID);
    }
}
