//! Upwind discontinuous Galerkin discretization on uniform rectangular
//! meshes: per-direction advection stencils, diagonal cross-section
//! operators, source and inflow-boundary vectors, and the affine-in-
//! parameter reconstruction used by the reduced-order machinery.

mod basis;
mod material;
mod mesh;
mod operators;

pub use basis::DgBasis;
pub use material::{CrossSectionPiece, InflowPiece, MaterialField, ParamBox};
pub use mesh::Mesh2D;
pub use operators::{assemble, AffineTerm, BoundOperators, DiscreteOperators};
