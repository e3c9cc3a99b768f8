//! Reduced-order synthetic acceleration.
//!
//! Offline, correction snapshots are recovered from stored FGMRES data
//! (no extra full solves), a reduced basis is grown by a greedy
//! residual-driven loop with truncated modified Gram-Schmidt, and affine
//! operator projections are precomputed.  Online, the reduced correction
//! acts as a synthetic-acceleration preconditioner for the first few
//! Krylov iterations before switching to DSA.

mod basis;
mod correction;
mod greedy;
mod io;
mod romsad;

pub use basis::{mgs_truncated, BoundReducedSystem, ReducedBasis};
pub use correction::{basis_preimages, correction_snapshots, CorrectionHistory};
pub use greedy::{
    all_snapshot_time, greedy_train, residual_indicator, GreedyConfig, GreedyOutcome,
    GreedyTimings, StopReason,
};
pub use io::{discretization_hash, load_basis, save_basis};
pub use romsad::{build_romsad, RomsadPreconditioner};
