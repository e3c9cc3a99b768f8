//! Matrix-free transport sweeps and the scalar-flux system they induce.
//!
//! For each direction the operator `D_j + Sigma_t` is block lower
//! triangular once cells are visited in upwind order, so it is solved
//! exactly by marching cells and back-solving the cached per-cell LU
//! factors.  Angular integration of the per-direction solves yields the
//! action of `T = sum_j w_j (D_j + Sigma_t)^{-1}`, and the scalar-flux
//! system is `(I - T Sigma_s) phi = b` with `b = sum_j w_j
//! (D_j + Sigma_t)^{-1} g_j`.  One "transport sweep" is one pass over
//! all directions; every solver reports its cost in this unit.

use rayon::prelude::*;

use crate::discretization::BoundOperators;
use crate::quadrature::AngularQuadrature;
use crate::{Error, Result};

/// Angular flux blocked per direction: `data[j * n_dof .. (j+1) * n_dof]`
/// holds the dofs for direction `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularFlux {
    pub data: Vec<f64>,
    pub n_dof: usize,
}

impl AngularFlux {
    pub fn zeros(n_dirs: usize, n_dof: usize) -> Self {
        AngularFlux { data: vec![0.0; n_dirs * n_dof], n_dof }
    }

    pub fn n_dirs(&self) -> usize {
        self.data.len() / self.n_dof
    }

    pub fn block(&self, j: usize) -> &[f64] {
        &self.data[j * self.n_dof..(j + 1) * self.n_dof]
    }

    pub fn block_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.n_dof..(j + 1) * self.n_dof]
    }
}

/// Discrete angular integration `phi = sum_j w_j psi_j`.
pub fn integrate_angular_flux(quad: &AngularQuadrature, psi: &AngularFlux) -> Result<Vec<f64>> {
    if psi.n_dirs() != quad.len() {
        return Err(Error::Domain(format!(
            "angular flux has {} direction blocks, quadrature has {}",
            psi.n_dirs(),
            quad.len()
        )));
    }
    let mut phi = vec![0.0; psi.n_dof];
    for (j, &w) in quad.weights.iter().enumerate() {
        for (p, v) in phi.iter_mut().zip(psi.block(j)) {
            *p += w * v;
        }
    }
    Ok(phi)
}

impl<'a> BoundOperators<'a> {
    /// Solve `(D_j + Sigma_t) psi_j = rhs` exactly by one upwind sweep.
    pub fn sweep_direction(&self, j: usize, rhs: &[f64]) -> Vec<f64> {
        let mut psi = vec![0.0; self.n_dof()];
        self.sweep_direction_into(j, rhs, &mut psi);
        psi
    }

    pub(crate) fn sweep_direction_into(&self, j: usize, rhs: &[f64], psi: &mut [f64]) {
        let dd = &self.dir_data[j];
        let mesh = &self.ops.mesh;
        let m = self.ops.dofs_per_cell();
        debug_assert_eq!(rhs.len(), self.n_dof());
        let mut local = vec![0.0; m];
        let (nx, ny) = (mesh.nx as isize, mesh.ny as isize);
        let y_range: Vec<usize> = if dd.step_y <= 0 {
            (0..mesh.ny).collect()
        } else {
            (0..mesh.ny).rev().collect()
        };
        let x_range: Vec<usize> = if dd.step_x <= 0 {
            (0..mesh.nx).collect()
        } else {
            (0..mesh.nx).rev().collect()
        };
        for &iy in &y_range {
            for &ix in &x_range {
                let c = mesh.cell_index(ix, iy);
                local.copy_from_slice(&rhs[c * m..(c + 1) * m]);
                if dd.has_x {
                    let jx = ix as isize + dd.step_x;
                    if (0..nx).contains(&jx) {
                        let nb = mesh.cell_index(jx as usize, iy);
                        let nb_psi = &psi[nb * m..(nb + 1) * m];
                        for (r, l) in local.iter_mut().enumerate() {
                            let row = dd.coup_x.row(r);
                            let mut s = 0.0;
                            for (a, b) in row.iter().zip(nb_psi) {
                                s += a * b;
                            }
                            *l -= s;
                        }
                    }
                }
                if dd.has_y {
                    let jy = iy as isize + dd.step_y;
                    if (0..ny).contains(&jy) {
                        let nb = mesh.cell_index(ix, jy as usize);
                        let nb_psi = &psi[nb * m..(nb + 1) * m];
                        for (r, l) in local.iter_mut().enumerate() {
                            let row = dd.coup_y.row(r);
                            let mut s = 0.0;
                            for (a, b) in row.iter().zip(nb_psi) {
                                s += a * b;
                            }
                            *l -= s;
                        }
                    }
                }
                let lu = &dd.diag_lu[self.class_of_cell[c] as usize];
                lu.solve_in_place(&mut local);
                psi[c * m..(c + 1) * m].copy_from_slice(&local);
            }
        }
        self.count_direction_sweeps(1);
    }

    /// `T rho = sum_j w_j (D_j + Sigma_t)^{-1} rho`: one transport sweep.
    ///
    /// Direction solves run in parallel; the angular reduction is
    /// accumulated in direction order so results are deterministic for a
    /// fixed build.
    pub fn sweep_and_integrate(&self, rho: &[f64]) -> Vec<f64> {
        let blocks: Vec<Vec<f64>> = (0..self.n_dirs())
            .into_par_iter()
            .map(|j| self.sweep_direction(j, rho))
            .collect();
        self.reduce_blocks(&blocks)
    }

    /// Full sweep of the per-direction right-hand sides: the scalar-flux
    /// system right-hand side `b = sum_j w_j (D_j + Sigma_t)^{-1} g_j`.
    pub fn scalar_rhs(&self) -> Vec<f64> {
        let blocks: Vec<Vec<f64>> = (0..self.n_dirs())
            .into_par_iter()
            .map(|j| {
                let g = self.g_tilde(j);
                self.sweep_direction(j, &g)
            })
            .collect();
        self.reduce_blocks(&blocks)
    }

    /// Apply the scalar-flux system operator `phi - T (Sigma_s phi)`:
    /// one transport sweep.
    pub fn apply_scalar_operator(&self, phi: &[f64]) -> Vec<f64> {
        let scattered = self.apply_sigma_s(phi);
        let swept = self.sweep_and_integrate(&scattered);
        phi.iter().zip(&swept).map(|(p, t)| p - t).collect()
    }

    /// Sweep every direction against a shared source, keeping the
    /// per-direction fluxes: one transport sweep.
    pub fn sweep_all_directions(&self, rho: &[f64]) -> AngularFlux {
        let n_dof = self.n_dof();
        let blocks: Vec<Vec<f64>> = (0..self.n_dirs())
            .into_par_iter()
            .map(|j| self.sweep_direction(j, rho))
            .collect();
        let mut out = AngularFlux::zeros(self.n_dirs(), n_dof);
        for (j, b) in blocks.iter().enumerate() {
            out.block_mut(j).copy_from_slice(b);
        }
        out
    }

    fn reduce_blocks(&self, blocks: &[Vec<f64>]) -> Vec<f64> {
        let mut phi = vec![0.0; self.n_dof()];
        for (j, block) in blocks.iter().enumerate() {
            let w = self.ops.quad.weights[j];
            for (p, v) in phi.iter_mut().zip(block) {
                *p += w * v;
            }
        }
        phi
    }

    /// Residual `|| (I - T Sigma_s) phi - b ||_inf`; costs one transport
    /// sweep, which callers normally exclude from solver accounting.
    pub fn residual_inf(&self, phi: &[f64], b: &[f64]) -> f64 {
        let aphi = self.apply_scalar_operator(phi);
        aphi.iter()
            .zip(b)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}
