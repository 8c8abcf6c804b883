//! Finite element solver for a coupled thermo-elastic damage system.
//!
//! The library discretizes three coupled fields on a 2D domain: a hyperbolic
//! momentum equation for the displacement, a screened elliptic equation with
//! an irreversibility penalty for the damage indicator, and a (possibly
//! nonlinear) parabolic heat equation. Space is discretized with lowest-order
//! Lagrange elements on triangles or quadrilaterals, time with implicit
//! three-level finite difference stencils.
//!
//! Modules:
//! - [`tensor`]: small symmetric tensor algebra and the isotropic elasticity
//!   operators,
//! - [`mesh`]: structured unit-square and notched-square meshes,
//! - [`space`]: shape functions, quadrature, field evaluation, norms, and
//!   Gauss-point-to-node derivative recovery,
//! - [`linalg`]: sparse symmetric storage, LDL^T and banded LU direct solvers,
//! - [`assembly`]: element weak forms and global assembly of the three
//!   equations,
//! - [`nonlinear`]: (semismooth) Newton iteration,
//! - [`stepper`]: the time loop,
//! - [`analysis`]: error tables, convergence rates, stability monitors, and
//!   the a priori data functionals,
//! - [`catalog`]/[`config`]/[`cli`]: named data functions, run configuration,
//!   and the batch driver.

pub mod analysis;
pub mod assembly;
pub mod catalog;
pub mod cli;
pub mod config;
pub mod linalg;
pub mod mesh;
pub mod nonlinear;
pub mod space;
pub mod stepper;
pub mod tensor;
pub mod vtk;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("linear solver breakdown: {0}")]
    SolverBreakdown(String),
    #[error("step {step} failed: {detail}")]
    StepFailure { step: usize, detail: String },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Shorthand used by validation code.
pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
