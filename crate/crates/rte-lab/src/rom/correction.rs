//! Recovering ideal-correction snapshots from FGMRES data.
//!
//! Each Krylov basis vector `v^(l)` defines a preimage `xi^(l)` solving
//! the scalar-flux system `(I - T Sigma_s) xi = v^(l)`.  The preimages
//! follow from stored FGMRES quantities alone: the first from the
//! converged solution, the rest from the Arnoldi recurrence inverted
//! column by column.  One extra transport sweep per preimage then turns
//! them into angular correction snapshots `(D_j + Sigma_t) dpsi_j =
//! Sigma_s xi`.

use crate::discretization::BoundOperators;
use crate::linalg;
use crate::solvers::KrylovState;
use crate::transport::AngularFlux;
use crate::{Error, Result};

/// Preimages of the Krylov basis under the scalar-flux operator.
#[derive(Debug, Clone)]
pub struct CorrectionHistory {
    /// `xi^(1..=w)`, each of scalar-flux length.
    pub preimages: Vec<Vec<f64>>,
}

/// Compute `xi^(l)` for `l = 1..=window` from the FGMRES state, the
/// converged solution and the initial guess, with zero additional
/// transport sweeps.
///
/// A vanishing subdiagonal entry truncates the history (the Krylov space
/// stopped growing); fewer iterations than `window` truncate likewise.
pub fn basis_preimages(
    state: &KrylovState,
    phi_converged: &[f64],
    phi0: &[f64],
    window: usize,
) -> Result<CorrectionHistory> {
    if window == 0 {
        return Err(Error::Domain("correction window must be at least 1".into()));
    }
    if state.beta == 0.0 {
        return Err(Error::Domain(
            "FGMRES state has a zero initial residual; no correction data exists".into(),
        ));
    }
    let mut w = window;
    if state.iterations() < w {
        log::warn!(
            "correction window {w} exceeds the {} stored iterations; truncating",
            state.iterations()
        );
        w = state.iterations();
    }
    let mut preimages: Vec<Vec<f64>> = Vec::with_capacity(w);
    let xi1: Vec<f64> = phi_converged
        .iter()
        .zip(phi0)
        .map(|(p, p0)| (p - p0) / state.beta)
        .collect();
    preimages.push(xi1);
    for l in 2..=w {
        // column l-1 of H (1-based): entries H[i][l-1], i = 1..=l
        let col = &state.hessenberg[l - 2];
        let h_sub = col[l - 1];
        if h_sub.abs() < 1e-14 {
            log::warn!("H[{l},{}] = {h_sub:.3e} is negligible; truncating preimages at {}", l - 1, l - 1);
            break;
        }
        let mut xi = state.preconditioned[l - 2].clone();
        for (i, prev) in preimages.iter().enumerate() {
            linalg::axpy(-col[i], prev, &mut xi);
        }
        linalg::scale(&mut xi, 1.0 / h_sub);
        preimages.push(xi);
    }
    Ok(CorrectionHistory { preimages })
}

/// Angular correction snapshots: one transport sweep per preimage solves
/// `(D_j + Sigma_t) dpsi_j = Sigma_s xi` for all directions.
pub fn correction_snapshots(bound: &BoundOperators, hist: &CorrectionHistory) -> Vec<AngularFlux> {
    hist.preimages
        .iter()
        .map(|xi| {
            let source = bound.apply_sigma_s(xi);
            bound.sweep_all_directions(&source)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble, DgBasis, MaterialField, Mesh2D};
    use crate::quadrature::AngularQuadrature;
    use crate::solvers::{fgmres, IdentityPreconditioner, SolverConfig};
    use crate::transport::integrate_angular_flux;

    fn instance() -> crate::discretization::DiscreteOperators {
        let mesh = Mesh2D::new([0.0, 1.0, 0.0, 1.0], 3, 3).unwrap();
        let basis = DgBasis::new(1).unwrap();
        let quad = AngularQuadrature::chebyshev_legendre(4, 2).unwrap();
        let mat = MaterialField::homogeneous(1.0, 0.5, |x, y| {
            (-10.0 * ((x - 0.4).powi(2) + (y - 0.6).powi(2))).exp()
        });
        assemble(mesh, basis, quad, &mat).unwrap()
    }

    #[test]
    fn first_preimage_is_scaled_solution_for_zero_guess() {
        let ops = instance();
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        let cfg = SolverConfig::default();
        let (report, state) = fgmres(&bound, &IdentityPreconditioner, &cfg, None).unwrap();
        assert!(report.converged);
        let zeros = vec![0.0; ops.n_dof()];
        let hist = basis_preimages(&state, &report.solution, &zeros, 1).unwrap();
        // r0 = b, so xi^(1) = phi / ||b||
        let b = bound.scalar_rhs();
        let b_norm = linalg::norm2(&b);
        for (x, p) in hist.preimages[0].iter().zip(&report.solution) {
            assert!((x - p / b_norm).abs() <= 1e-14);
        }
    }

    #[test]
    fn preimages_satisfy_the_defining_equation() {
        let ops = instance();
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        let cfg = SolverConfig::default();
        let (report, state) = fgmres(&bound, &IdentityPreconditioner, &cfg, None).unwrap();
        assert!(report.converged);
        let zeros = vec![0.0; ops.n_dof()];
        let w = 3.min(state.iterations());
        let hist = basis_preimages(&state, &report.solution, &zeros, w).unwrap();
        for (l, xi) in hist.preimages.iter().enumerate() {
            let axi = bound.apply_scalar_operator(xi);
            let v = &state.basis[l];
            let mut diff = 0.0_f64;
            for (a, b) in axi.iter().zip(v) {
                diff += (a - b) * (a - b);
            }
            let rel = diff.sqrt() / linalg::norm2(v);
            assert!(rel <= 1e-8, "preimage {} defect {rel:.3e}", l + 1);
        }
    }

    #[test]
    fn snapshots_match_dense_ideal_correction() {
        // integrated snapshot must equal the integrated dense solve of
        // the coupled correction system with rhs Sigma_s v^(l)
        let ops = instance();
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        let cfg = SolverConfig::default();
        let (report, state) = fgmres(&bound, &IdentityPreconditioner, &cfg, None).unwrap();
        let zeros = vec![0.0; ops.n_dof()];
        let w = 2.min(state.iterations());
        let hist = basis_preimages(&state, &report.solution, &zeros, w).unwrap();
        let snaps = correction_snapshots(&bound, &hist);
        let (a, _) = bound.build_full_matrix().unwrap();
        let lu = a.lu().unwrap();
        let nd = ops.n_dof();
        for (l, snap) in snaps.iter().enumerate() {
            let sv = bound.apply_sigma_s(&state.basis[l]);
            let mut rhs = vec![0.0; nd * ops.n_dirs()];
            for j in 0..ops.n_dirs() {
                rhs[j * nd..(j + 1) * nd].copy_from_slice(&sv);
            }
            let dpsi = lu.solve(&rhs);
            let dense_flux = AngularFlux { data: dpsi, n_dof: nd };
            let dphi_dense = integrate_angular_flux(&ops.quad, &dense_flux).unwrap();
            let dphi_snap = integrate_angular_flux(&ops.quad, snap).unwrap();
            // identity: dphi = T Sigma_s xi
            let dphi_t = bound.sweep_and_integrate(&bound.apply_sigma_s(&hist.preimages[l]));
            let rel = |a: &[f64], b: &[f64]| {
                let n: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                n / linalg::norm2(b).max(f64::MIN_POSITIVE)
            };
            assert!(rel(&dphi_snap, &dphi_dense) <= 1e-8, "snapshot {} vs dense", l + 1);
            assert!(rel(&dphi_snap, &dphi_t) <= 1e-10, "snapshot {} vs swept preimage", l + 1);
        }
    }

    #[test]
    fn zero_preimage_gives_zero_snapshot() {
        let ops = instance();
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        let hist = CorrectionHistory { preimages: vec![vec![0.0; ops.n_dof()]] };
        let snaps = correction_snapshots(&bound, &hist);
        assert!(snaps[0].data.iter().all(|&x| x == 0.0));
    }
}
