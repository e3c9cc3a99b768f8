//! Iterative solvers over the scalar-flux system: Source Iteration with
//! optional synthetic-acceleration correction, right-preconditioned
//! GMRES, and flexible GMRES with an iteration-indexed (possibly
//! nonlinear) preconditioner.

use std::time::Instant;

use serde::Serialize;

use crate::discretization::BoundOperators;
use crate::linalg::{self, Givens};
use crate::{Error, Result};

pub use crate::linalg::least_squares_hessenberg;

/// Which preconditioner acted at a given iteration, for report traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PrecondTag {
    Identity,
    Dsa,
    RomSa,
}

/// Iteration-indexed preconditioner `M_j^{-1}` (1-based iteration index).
///
/// Implementations must not mutate solver-visible state; if `is_linear`
/// returns true the map must be the same fixed linear operator for every
/// iteration.
pub trait Preconditioner: Sync {
    fn apply(&self, iteration: usize, r: &[f64]) -> Result<Vec<f64>>;
    fn is_linear(&self) -> bool;
    fn tag(&self, iteration: usize) -> PrecondTag;
}

/// The trivial preconditioner.
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, _iteration: usize, r: &[f64]) -> Result<Vec<f64>> {
        Ok(r.to_vec())
    }
    fn is_linear(&self) -> bool {
        true
    }
    fn tag(&self, _iteration: usize) -> PrecondTag {
        PrecondTag::Identity
    }
}

/// Solver settings shared by all iterative methods.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Relative residual tolerance (against `||b||_2`).
    pub tol: f64,
    /// Maximum iterations (Krylov dimension for the GMRES family).
    pub max_iter: usize,
    /// Re-run the Gram-Schmidt pass when the first pass removes most of
    /// the new vector's mass.
    pub reorthogonalize: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-11, max_iter: 200, reorthogonalize: false }
    }
}

/// Outcome of one solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Transport sweeps consumed by the solve proper (residual
    /// verification afterwards is not counted).
    pub transport_sweeps: f64,
    /// Relative residual after each iteration; entry 0 is the initial
    /// residual.
    pub residual_history: Vec<f64>,
    /// `|| (I - T Sigma_s) phi - b ||_inf` of the returned solution.
    pub final_residual_inf: f64,
    pub wall_seconds: f64,
    pub converged: bool,
    /// Set when the Arnoldi process broke down before reaching the
    /// tolerance.
    pub breakdown: bool,
    pub precond_trace: Vec<PrecondTag>,
}

/// Arnoldi data captured by FGMRES for reduced-order training.
#[derive(Debug, Clone)]
pub struct KrylovState {
    /// Orthonormal basis `v^(1..=j+1)` (the last vector may be absent
    /// after a breakdown).
    pub basis: Vec<Vec<f64>>,
    /// Preconditioned vectors `z^(1..=j)`.
    pub preconditioned: Vec<Vec<f64>>,
    /// Raw Hessenberg columns: column `l` holds `H[0..=l+1][l]`.
    pub hessenberg: Vec<Vec<f64>>,
    /// Initial residual norm.
    pub beta: f64,
}

impl KrylovState {
    pub fn iterations(&self) -> usize {
        self.preconditioned.len()
    }

    /// Orthonormality defect `max |V^T V - I|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (i, vi) in self.basis.iter().enumerate() {
            for (j, vj) in self.basis.iter().enumerate() {
                let d = linalg::dot(vi, vj) - if i == j { 1.0 } else { 0.0 };
                worst = worst.max(d.abs());
            }
        }
        worst
    }
}

/// Source Iteration on the scalar-flux system, optionally corrected each
/// iteration by a synthetic-acceleration preconditioner.
///
/// Stops when `||phi^(l,*) - phi^(l-1)||_2 <= tol * ||b||_2`.  Reaching
/// `max_iter` yields a non-converged report, not an error.
pub fn source_iteration(
    bound: &BoundOperators,
    correction: Option<&dyn Preconditioner>,
    cfg: &SolverConfig,
    initial_guess: Option<&[f64]>,
) -> Result<SolveReport> {
    if cfg.tol <= 0.0 {
        return Err(Error::Config("source iteration needs tol > 0".into()));
    }
    let start = Instant::now();
    let sweeps0 = bound.transport_sweeps();
    let b = bound.scalar_rhs();
    let b_norm = linalg::norm2(&b);
    let mut phi: Vec<f64> = initial_guess.map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; b.len()]);
    let guess_is_zero = phi.iter().all(|&x| x == 0.0);
    if b_norm == 0.0 {
        let sweeps = bound.transport_sweeps() - sweeps0;
        return Ok(SolveReport {
            solution: vec![0.0; b.len()],
            iterations: 0,
            transport_sweeps: sweeps,
            residual_history: vec![0.0],
            final_residual_inf: 0.0,
            wall_seconds: start.elapsed().as_secs_f64(),
            converged: true,
            breakdown: false,
            precond_trace: Vec::new(),
        })
    }
    let mut history = Vec::new();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for l in 1..=cfg.max_iter {
        // phi^(l,*) = T Sigma_s phi^(l-1) + b; the first iterate with a
        // zero guess is b itself and needs no sweep
        let phi_star = if l == 1 && guess_is_zero {
            b.clone()
        } else {
            let mut p = bound.sweep_and_integrate(&bound.apply_sigma_s(&phi));
            for (a, bv) in p.iter_mut().zip(&b) {
                *a += bv;
            }
            p
        };
        let r: Vec<f64> = phi_star.iter().zip(&phi).map(|(a, b)| a - b).collect();
        let r_norm = linalg::norm2(&r);
        history.push(r_norm / b_norm);
        iterations = l;
        if r_norm <= cfg.tol * b_norm {
            phi = phi_star;
            converged = true;
            break;
        }
        match correction {
            Some(m) => {
                let update = m.apply(l, &r)?;
                trace.push(m.tag(l));
                for (p, u) in phi.iter_mut().zip(&update) {
                    *p += u;
                }
            }
            None => phi = phi_star,
        }
    }
    let sweeps = bound.transport_sweeps() - sweeps0;
    let final_residual_inf = bound.residual_inf(&phi, &b);
    Ok(SolveReport {
        solution: phi,
        iterations,
        transport_sweeps: sweeps,
        residual_history: history,
        final_residual_inf,
        wall_seconds: start.elapsed().as_secs_f64(),
        converged,
        breakdown: false,
        precond_trace: trace,
    })
}

/// Right-preconditioned GMRES on the scalar-flux system; the
/// preconditioner must be linear.
pub fn gmres_right(
    bound: &BoundOperators,
    precond: &dyn Preconditioner,
    cfg: &SolverConfig,
    initial_guess: Option<&[f64]>,
) -> Result<SolveReport> {
    if !precond.is_linear() {
        return Err(Error::Config(
            "right-preconditioned GMRES requires a linear preconditioner; use fgmres instead".into(),
        ));
    }
    let outcome = krylov_core(bound, precond, cfg, initial_guess, false)?;
    Ok(outcome.0)
}

/// Flexible GMRES: stores the preconditioned vectors so the
/// preconditioner may change every iteration, and exposes the Arnoldi
/// data for snapshot generation.
pub fn fgmres(
    bound: &BoundOperators,
    precond: &dyn Preconditioner,
    cfg: &SolverConfig,
    initial_guess: Option<&[f64]>,
) -> Result<(SolveReport, KrylovState)> {
    let (report, state) = krylov_core(bound, precond, cfg, initial_guess, true)?;
    Ok((report, state.expect("flexible path always returns Arnoldi state")))
}

/// Shared Arnoldi driver.  `flexible` stores `z^(j)` and reconstructs
/// the solution from them; otherwise the right-preconditioned update
/// `x = x0 + M^{-1} V y` is used.
fn krylov_core(
    bound: &BoundOperators,
    precond: &dyn Preconditioner,
    cfg: &SolverConfig,
    initial_guess: Option<&[f64]>,
    flexible: bool,
) -> Result<(SolveReport, Option<KrylovState>)> {
    if cfg.max_iter == 0 {
        return Err(Error::Config("Krylov solvers need max_iter >= 1".into()));
    }
    let start = Instant::now();
    let sweeps0 = bound.transport_sweeps();
    let n = bound.n_dof();
    let b = bound.scalar_rhs();
    let b_norm = linalg::norm2(&b);

    let phi0: Vec<f64> = initial_guess.map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let guess_is_zero = linalg::norm2(&phi0) == 0.0;
    // r0 = b for a zero guess (no extra sweep), else b - A phi0
    let r0 = if guess_is_zero {
        b.clone()
    } else {
        let aphi = bound.apply_scalar_operator(&phi0);
        linalg::sub(&b, &aphi)
    };
    let beta = linalg::norm2(&r0);
    let mut history = vec![if b_norm > 0.0 { beta / b_norm } else { 0.0 }];
    let mut trace = Vec::new();

    let finish = |solution: Vec<f64>,
                  iterations: usize,
                  history: Vec<f64>,
                  converged: bool,
                  breakdown: bool,
                  trace: Vec<PrecondTag>,
                  state: Option<KrylovState>| {
        let sweeps = bound.transport_sweeps() - sweeps0;
        let final_residual_inf = bound.residual_inf(&solution, &b);
        (
            SolveReport {
                solution,
                iterations,
                transport_sweeps: sweeps,
                residual_history: history,
                final_residual_inf,
                wall_seconds: start.elapsed().as_secs_f64(),
                converged,
                breakdown,
                precond_trace: trace,
            },
            state,
        )
    };

    if b_norm == 0.0 || beta <= cfg.tol * b_norm {
        // nothing to do: either a zero problem or the guess already meets
        // the tolerance
        let state = KrylovState {
            basis: Vec::new(),
            preconditioned: Vec::new(),
            hessenberg: Vec::new(),
            beta,
        };
        let sol = if b_norm == 0.0 { vec![0.0; n] } else { phi0 };
        return Ok(finish(sol, 0, history, true, false, trace, Some(state)));
    }

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cfg.max_iter + 1);
    let mut v0 = r0;
    linalg::scale(&mut v0, 1.0 / beta);
    basis.push(v0);
    let mut z_store: Vec<Vec<f64>> = Vec::new();
    let mut h_raw: Vec<Vec<f64>> = Vec::new();
    // Givens-rotated triangular columns and rotated rhs for the running
    // least-squares residual
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut rotations: Vec<Givens> = Vec::new();
    let mut g = vec![0.0; cfg.max_iter + 1];
    g[0] = beta;

    let mut converged = false;
    let mut breakdown = false;
    let mut iterations = 0;

    for j in 1..=cfg.max_iter {
        let z = precond.apply(j, &basis[j - 1])?;
        trace.push(precond.tag(j));
        let mut w = bound.apply_scalar_operator(&z);
        if flexible {
            z_store.push(z);
        }
        let w_norm_initial = linalg::norm2(&w);
        let mut h_col = vec![0.0; j + 1];
        for (i, vi) in basis.iter().enumerate() {
            let hij = linalg::dot(&w, vi);
            h_col[i] = hij;
            linalg::axpy(-hij, vi, &mut w);
        }
        if cfg.reorthogonalize && linalg::norm2(&w) < 0.1 * w_norm_initial {
            for (i, vi) in basis.iter().enumerate() {
                let corr = linalg::dot(&w, vi);
                h_col[i] += corr;
                linalg::axpy(-corr, vi, &mut w);
            }
        }
        let h_sub = linalg::norm2(&w);
        h_col[j] = h_sub;
        h_raw.push(h_col.clone());

        // rotate the new column and update the residual estimate
        let mut col = h_col;
        for (i, rot) in rotations.iter().enumerate() {
            let (mut a, mut b2) = (col[i], col[i + 1]);
            rot.apply(&mut a, &mut b2);
            col[i] = a;
            col[i + 1] = b2;
        }
        let rot = Givens::compute(col[j - 1], col[j]);
        let (mut a, mut b2) = (col[j - 1], col[j]);
        rot.apply(&mut a, &mut b2);
        col[j - 1] = a;
        col[j] = b2;
        let (mut ga, mut gb) = (g[j - 1], g[j]);
        rot.apply(&mut ga, &mut gb);
        g[j - 1] = ga;
        g[j] = gb;
        rotations.push(rot);
        r_cols.push(col);

        iterations = j;
        let res = g[j].abs();
        history.push(res / b_norm);
        let tiny_subdiag = h_sub <= 1e-14 * w_norm_initial.max(f64::MIN_POSITIVE);
        if res <= cfg.tol * b_norm {
            converged = true;
            break;
        }
        if tiny_subdiag {
            // cannot extend the Krylov space; lucky only if the residual
            // already dropped
            breakdown = true;
            converged = res <= cfg.tol * b_norm;
            break;
        }
        linalg::scale(&mut w, 1.0 / h_sub);
        basis.push(w);
    }

    // back substitution on the rotated triangular system
    let j = iterations;
    let mut y = vec![0.0; j];
    for i in (0..j).rev() {
        let mut s = g[i];
        for k in (i + 1)..j {
            s -= r_cols[k][i] * y[k];
        }
        let d = r_cols[i][i];
        y[i] = if d != 0.0 { s / d } else { 0.0 };
    }
    let mut solution = phi0;
    if flexible {
        for (yl, zl) in y.iter().zip(&z_store) {
            linalg::axpy(*yl, zl, &mut solution);
        }
    } else {
        let mut vy = vec![0.0; n];
        for (yl, vl) in y.iter().zip(&basis) {
            linalg::axpy(*yl, vl, &mut vy);
        }
        let update = precond.apply(j.max(1), &vy)?;
        linalg::axpy(1.0, &update, &mut solution);
    }

    let state = if flexible {
        Some(KrylovState { basis, preconditioned: z_store, hessenberg: h_raw, beta })
    } else {
        None
    };
    Ok(finish(solution, iterations, history, converged, breakdown, trace, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble, DgBasis, DiscreteOperators, MaterialField, Mesh2D};
    use crate::quadrature::AngularQuadrature;
    use crate::transport::{integrate_angular_flux, AngularFlux};

    fn homogeneous_instance(sigma_s: f64, sigma_a: f64) -> DiscreteOperators {
        let mesh = Mesh2D::new([0.0, 1.0, 0.0, 1.0], 3, 3).unwrap();
        let basis = DgBasis::new(1).unwrap();
        let quad = AngularQuadrature::chebyshev_legendre(4, 2).unwrap();
        let mat = MaterialField::homogeneous(sigma_s, sigma_a, |x, y| {
            (-((x - 0.5).powi(2) + (y - 0.5).powi(2)) * 20.0).exp()
        });
        assemble(mesh, basis, quad, &mat).unwrap()
    }

    fn dense_scalar_solution(bound: &crate::discretization::BoundOperators) -> Vec<f64> {
        let (a, b) = bound.build_full_matrix().unwrap();
        let psi = a.lu().unwrap().solve(&b);
        let flux = AngularFlux { data: psi, n_dof: bound.n_dof() };
        integrate_angular_flux(&bound.ops.quad, &flux).unwrap()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        num / linalg::norm2(b).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn si_converges_in_one_iteration_without_scattering() {
        let ops = homogeneous_instance(0.0, 2.0);
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        let report = source_iteration(&bound, None, &SolverConfig::default(), None).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 1);
        let want = dense_scalar_solution(&bound);
        assert!(rel_err(&report.solution, &want) <= 1e-10);
    }

    #[test]
    fn si_matches_dense_solution_with_scattering() {
        let ops = homogeneous_instance(0.7, 1.0);
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        let report = source_iteration(&bound, None, &SolverConfig::default(), None).unwrap();
        assert!(report.converged, "history: {:?}", report.residual_history);
        let want = dense_scalar_solution(&bound);
        assert!(rel_err(&report.solution, &want) <= 1e-8);
        // first iterate is free with a zero guess, so sweeps == iterations
        assert_eq!(report.transport_sweeps, report.iterations as f64);
    }

    #[test]
    fn si_flags_non_convergence() {
        let ops = homogeneous_instance(50.0, 0.0);
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        let cfg = SolverConfig { max_iter: 3, ..Default::default() };
        let report = source_iteration(&bound, None, &cfg, None).unwrap();
        assert!(!report.converged);
        assert_eq!(report.iterations, 3);
    }

    #[test]
    fn gmres_zero_rhs_returns_zero() {
        let mesh = Mesh2D::new([0.0, 1.0, 0.0, 1.0], 2, 2).unwrap();
        let basis = DgBasis::new(1).unwrap();
        let quad = AngularQuadrature::chebyshev_legendre(2, 1).unwrap();
        let mat = MaterialField::homogeneous(1.0, 0.0, |_, _| 0.0);
        let ops = assemble(mesh, basis, quad, &mat).unwrap();
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        let report =
            gmres_right(&bound, &IdentityPreconditioner, &SolverConfig::default(), None).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 0);
        assert!(report.solution.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gmres_matches_dense_solution() {
        let ops = homogeneous_instance(0.9, 0.6);
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        let report =
            gmres_right(&bound, &IdentityPreconditioner, &SolverConfig::default(), None).unwrap();
        assert!(report.converged);
        let want = dense_scalar_solution(&bound);
        assert!(rel_err(&report.solution, &want) <= 1e-9);
        assert_eq!(report.transport_sweeps, (report.iterations + 1) as f64);
    }

    #[test]
    fn gmres_residual_history_non_increasing() {
        let ops = homogeneous_instance(2.0, 0.1);
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        let report =
            gmres_right(&bound, &IdentityPreconditioner, &SolverConfig::default(), None).unwrap();
        for w in report.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "history not monotone: {w:?}");
        }
    }

    #[test]
    fn fgmres_with_identity_equals_gmres() {
        let ops = homogeneous_instance(1.5, 0.3);
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        let cfg = SolverConfig::default();
        let g = gmres_right(&bound, &IdentityPreconditioner, &cfg, None).unwrap();
        let (f, state) = fgmres(&bound, &IdentityPreconditioner, &cfg, None).unwrap();
        assert_eq!(g.iterations, f.iterations);
        for (a, b) in g.residual_history.iter().zip(&f.residual_history) {
            assert!((a - b).abs() <= 1e-12, "histories diverge: {a} vs {b}");
        }
        assert!(rel_err(&f.solution, &g.solution) <= 1e-10);
        assert!(state.orthogonality_defect() <= 1e-10);
    }

    #[test]
    fn fgmres_nonzero_guess_counts_extra_sweep() {
        let ops = homogeneous_instance(1.0, 0.5);
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        let cfg = SolverConfig::default();
        let guess = vec![0.1; ops.n_dof()];
        let (report, _) = fgmres(&bound, &IdentityPreconditioner, &cfg, Some(&guess)).unwrap();
        assert!(report.converged);
        assert_eq!(report.transport_sweeps, (report.iterations + 2) as f64);
    }

    #[test]
    fn gmres_rejects_nonlinear_preconditioner() {
        struct Fake;
        impl Preconditioner for Fake {
            fn apply(&self, _j: usize, r: &[f64]) -> Result<Vec<f64>> {
                Ok(r.to_vec())
            }
            fn is_linear(&self) -> bool {
                false
            }
            fn tag(&self, _j: usize) -> PrecondTag {
                PrecondTag::RomSa
            }
        }
        let ops = homogeneous_instance(1.0, 0.5);
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        assert!(gmres_right(&bound, &Fake, &SolverConfig::default(), None).is_err());
    }

    #[test]
    fn ideal_dense_correction_converges_si_next_iteration() {
        // one SI step, corrected by the dense solve of the ideal kinetic
        // correction equation, must satisfy the next iterate to solver
        // tolerance
        let ops = homogeneous_instance(1.2, 0.4);
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        let b = bound.scalar_rhs();
        let b_norm = linalg::norm2(&b);
        let nd = bound.n_dof();
        let ndirs = bound.n_dirs();

        let phi_prev = vec![0.0; nd];
        let phi_star = b.clone(); // first SI update from a zero guess
        let r: Vec<f64> = phi_star.iter().zip(&phi_prev).map(|(a, b)| a - b).collect();

        // dense ideal correction: A dpsi = repeat(Sigma_s r)
        let (a, _) = bound.build_full_matrix().unwrap();
        let sr = bound.apply_sigma_s(&r);
        let mut rhs = vec![0.0; nd * ndirs];
        for j in 0..ndirs {
            rhs[j * nd..(j + 1) * nd].copy_from_slice(&sr);
        }
        let dpsi = a.lu().unwrap().solve(&rhs);
        let flux = AngularFlux { data: dpsi, n_dof: nd };
        let dphi = integrate_angular_flux(&ops.quad, &flux).unwrap();

        let mut phi_corrected = phi_star.clone();
        for (p, d) in phi_corrected.iter_mut().zip(&dphi) {
            *p += d;
        }
        // next SI iterate
        let mut next = bound.sweep_and_integrate(&bound.apply_sigma_s(&phi_corrected));
        for (n, bv) in next.iter_mut().zip(&b) {
            *n += bv;
        }
        let delta: Vec<f64> = next.iter().zip(&phi_corrected).map(|(a, b)| a - b).collect();
        assert!(
            linalg::norm2(&delta) <= 1e-11 * b_norm,
            "ideal correction did not converge SI in one step: {:.3e}",
            linalg::norm2(&delta) / b_norm
        );
    }
}
