use thiserror::Error;

/// Errors produced while building discretizations or running simulations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("polynomial degree {0} outside supported range 1..=8")]
    DegreeOutOfRange(usize),

    #[error("array length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("index {0} out of range (valid 1..={1})")]
    IndexOutOfRange(usize, usize),

    #[error("evaluation point {0} outside [-1, 1]")]
    PointOutOfRange(f64),

    #[error("mesh size {h} does not evenly divide extent {extent}")]
    NonDivisibleMeshSize { h: f64, extent: f64 },

    #[error("non-conforming mesh: {0}")]
    NonConformingMesh(String),

    #[error("nonpositive Jacobian on element {elem} at tau = {tau}")]
    NonPositiveJacobian { elem: usize, tau: f64 },

    #[error("weighted mass matrix on element {elem} is not positive definite")]
    NonSpdMass { elem: usize },

    #[error("non-finite state in field {field} at step {step}, tau = {tau}")]
    NonFiniteState {
        field: String,
        step: usize,
        tau: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("mesh file parse error: {0}")]
    MeshParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
