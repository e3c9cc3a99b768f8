//! Solver laboratory for the steady-state radiative transfer equation in
//! 2D X-Y geometry.
//!
//! The pipeline is: discrete-ordinates angular discretization on a
//! Chebyshev-Legendre product rule ([`quadrature`]), upwind discontinuous
//! Galerkin space discretization on uniform rectangular meshes
//! ([`discretization`]), matrix-free transport sweeps ([`transport`]),
//! and iterative solvers (Source Iteration, GMRES, FGMRES) over the
//! scalar-flux system ([`solvers`]).  Preconditioning comes in two
//! flavors: classical diffusion synthetic acceleration ([`dsa`]) and a
//! reduced-order-model synthetic acceleration with a DSA fallback that is
//! trained offline by a greedy residual-driven loop ([`rom`]).  The
//! [`bench`] module carries the parametric problem catalog, metric
//! aggregation and file exports used by the CLI.

pub mod bench;
pub mod discretization;
pub mod dsa;
pub mod linalg;
pub mod quadrature;
pub mod rom;
pub mod solvers;
pub mod transport;

pub use discretization::{
    assemble, BoundOperators, DgBasis, DiscreteOperators, MaterialField, Mesh2D,
};
pub use quadrature::AngularQuadrature;
pub use solvers::{Preconditioner, SolveReport};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid user-facing configuration (mesh sizes, solver settings, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// A precondition on operation inputs was violated.
    #[error("domain error: {0}")]
    Domain(String),
    /// Numerical failure (singular block, inner solver stall, ...).
    #[error("numerical error: {0}")]
    Numerics(String),
    /// Malformed basis file or incompatible on-disk data.
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
