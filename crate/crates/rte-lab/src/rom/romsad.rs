//! The windowed reduced-order / DSA synthetic-acceleration switch.

use super::basis::{BoundReducedSystem, ReducedBasis};
use crate::discretization::BoundOperators;
use crate::dsa::DsaPreconditioner;
use crate::linalg;
use crate::solvers::{PrecondTag, Preconditioner};
use crate::{Error, Result};

/// Nonlinear preconditioner applying the reduced-order correction for
/// the first `window` iterations and DSA afterwards.
pub struct RomsadPreconditioner<'b> {
    basis: &'b ReducedBasis,
    reduced: BoundReducedSystem,
    dsa: DsaPreconditioner,
    pub window: usize,
    sigma_s_dof: Vec<f64>,
}

/// Bind the reduced operator at the parameter of `bound` and couple it
/// with a DSA fallback.
pub fn build_romsad<'b>(
    basis: &'b ReducedBasis,
    dsa: DsaPreconditioner,
    bound: &BoundOperators,
    window: usize,
) -> Result<RomsadPreconditioner<'b>> {
    if basis.n_dirs != bound.n_dirs() || basis.n_dof != bound.n_dof() {
        return Err(Error::Domain(format!(
            "reduced basis shape ({} dirs, {} dofs) does not match the discretization ({} dirs, {} dofs)",
            basis.n_dirs,
            basis.n_dof,
            bound.n_dirs(),
            bound.n_dof()
        )));
    }
    let reduced = basis.bind(bound.ops, &bound.mu)?;
    let m = bound.ops.dofs_per_cell();
    let mut sigma_s_dof = vec![0.0; bound.n_dof()];
    for (c, &s) in bound.sigma_s_cells.iter().enumerate() {
        for l in 0..m {
            sigma_s_dof[c * m + l] = s;
        }
    }
    Ok(RomsadPreconditioner { basis, reduced, dsa, window, sigma_s_dof })
}

impl<'b> RomsadPreconditioner<'b> {
    /// `r + (sum_j w_j U_j) (U^T A U)^{-1} (sum_j U_j)^T Sigma_s r`;
    /// costs no transport sweeps.  `None` when the reduced system is
    /// unusable (empty or singular).
    pub fn apply_rom_correction(&self, r: &[f64]) -> Option<Vec<f64>> {
        if self.basis.r() == 0 {
            return None;
        }
        let scattered: Vec<f64> = self.sigma_s_dof.iter().zip(r).map(|(s, x)| s * x).collect();
        let rhs = self.basis.project_scalar(&scattered);
        let c = self.reduced.solve(&rhs)?;
        let mut out = self.basis.expand_weighted(&c);
        linalg::axpy(1.0, r, &mut out);
        Some(out)
    }

    pub fn dsa(&self) -> &DsaPreconditioner {
        &self.dsa
    }
}

impl<'b> Preconditioner for RomsadPreconditioner<'b> {
    fn apply(&self, iteration: usize, r: &[f64]) -> Result<Vec<f64>> {
        if iteration <= self.window {
            if let Some(out) = self.apply_rom_correction(r) {
                return Ok(out);
            }
            // singular or empty reduced system: DSA application instead
        }
        self.dsa.apply(iteration, r)
    }

    fn is_linear(&self) -> bool {
        // a zero window never applies the reduced correction
        self.window == 0 || self.basis.r() == 0
    }

    fn tag(&self, iteration: usize) -> PrecondTag {
        if iteration <= self.window && self.basis.r() > 0 && self.reduced.lu.is_some() {
            PrecondTag::RomSa
        } else {
            PrecondTag::Dsa
        }
    }
}
