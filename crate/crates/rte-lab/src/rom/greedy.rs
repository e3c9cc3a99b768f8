//! Greedy residual-driven training of the reduced basis.
//!
//! Offline loop: generate the scalar-flux right-hand sides for every
//! training parameter once, then repeatedly (a) solve the currently
//! sampled parameter with DSA-preconditioned flexible GMRES, (b) recover
//! its correction snapshots through the preimage recurrence plus one
//! sweep per window slot, (c) grow the basis and reduced operators, and
//! (d) score all unsampled parameters with a per-direction residual of
//! the reduced first-iteration correction, sampling the worst one.

use std::time::Instant;

use rayon::prelude::*;

use super::basis::ReducedBasis;
use super::correction::{basis_preimages, correction_snapshots};
use crate::discretization::DiscreteOperators;
use crate::dsa::{build_dsa, DsaVariant};
use crate::linalg;
use crate::solvers::{fgmres, SolverConfig};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct GreedyConfig {
    /// Number of leading iterations whose corrections feed the basis.
    pub window: usize,
    /// Absolute stopping tolerance on the residual indicator.
    pub eps_rom: f64,
    /// Hard cap on greedy iterations (sampled parameters).
    pub max_greedy: usize,
    /// First sampled parameter; must be a training-set member.
    pub initial_sample: Vec<f64>,
    /// Normalize snapshots to unit length before orthogonalization so
    /// badly scaled snapshots are not spuriously truncated.
    pub prenormalize: bool,
    /// Truncation tolerance of the orthogonalization.
    pub eps_qr: f64,
    pub solver: SolverConfig,
    pub dsa_variant: DsaVariant,
    pub dsa_inner_tol: f64,
    pub dsa_inner_max_iter: usize,
}

impl GreedyConfig {
    pub fn new(window: usize, eps_rom: f64, initial_sample: Vec<f64>) -> Self {
        GreedyConfig {
            window,
            eps_rom,
            max_greedy: usize::MAX,
            initial_sample,
            prenormalize: true,
            eps_qr: super::basis::DEFAULT_EPS_QR,
            solver: SolverConfig::default(),
            dsa_variant: DsaVariant::FullyConsistent,
            dsa_inner_tol: 1e-12,
            dsa_inner_max_iter: 100_000,
        }
    }
}

/// Wall-clock seconds per greedy phase, mirroring the offline cost
/// breakdown the benchmark reports print.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct GreedyTimings {
    /// Right-hand sides and initial residual projections for the whole
    /// training set.
    pub step1: f64,
    /// High-fidelity solves at sampled parameters.
    pub step2a: f64,
    /// Snapshot construction (preimages and sweeps).
    pub step2b: f64,
    /// Basis and reduced-operator updates.
    pub step2c: f64,
    /// Residual indicator evaluation over unsampled parameters.
    pub step3: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum StopReason {
    ResidualBelowTolerance,
    TrainingSetExhausted,
    MaxIterations,
}

pub struct GreedyOutcome {
    pub basis: ReducedBasis,
    /// Converged scalar fluxes at the sampled parameters (training
    /// byproduct, reusable as interpolation data).
    pub solutions: Vec<Vec<f64>>,
    pub timings: GreedyTimings,
    /// Largest residual indicator after each greedy iteration.
    pub residual_trace: Vec<f64>,
    pub stop: StopReason,
}

/// Residual of the reduced first-iteration correction at one parameter:
/// `max_j || (D_j + Sigma_t) dpsi_j - Sigma_s dphi - eta ||_2` where the
/// reduced correction solves the projected system against `eta`.
pub fn residual_indicator(
    basis: &ReducedBasis,
    ops: &DiscreteOperators,
    mu: &[f64],
    eta: &[f64],
) -> Result<f64> {
    let (sigma_s, sigma_a) = ops.cross_sections(mu)?;
    let reduced = basis.bind(ops, mu)?;
    let rhs = basis.project_scalar(eta);
    let c = match reduced.solve(&rhs) {
        Some(c) => c,
        None => vec![0.0; basis.r()],
    };
    let dphi = basis.expand_weighted(&c);
    let m = ops.dofs_per_cell();
    let n_dof = ops.n_dof();
    let mut worst = 0.0_f64;
    let mut residual = vec![0.0; n_dof];
    for j in 0..ops.n_dirs() {
        let psi_j = basis.expand_block(j, &c);
        ops.apply_advection(ops.quad.nodes[j], &psi_j, &mut residual, false);
        for (cell, (&ss, &sa)) in sigma_s.iter().zip(&sigma_a).enumerate() {
            let st = ss + sa;
            for l in 0..m {
                let idx = cell * m + l;
                residual[idx] += st * psi_j[idx] - ss * dphi[idx] - eta[idx];
            }
        }
        worst = worst.max(linalg::norm2(&residual));
    }
    Ok(worst)
}

pub fn greedy_train(
    ops: &DiscreteOperators,
    p_train: &[Vec<f64>],
    cfg: &GreedyConfig,
) -> Result<GreedyOutcome> {
    if p_train.is_empty() {
        return Err(Error::Config("greedy training needs a non-empty training set".into()));
    }
    if cfg.window == 0 {
        return Err(Error::Config("greedy training needs window >= 1".into()));
    }
    let initial_idx = p_train
        .iter()
        .position(|mu| mu == &cfg.initial_sample)
        .ok_or_else(|| {
            Error::Config(format!(
                "initial sample {:?} is not a member of the training set",
                cfg.initial_sample
            ))
        })?;

    let total_start = Instant::now();
    let mut timings = GreedyTimings::default();

    // Step 1: right-hand sides and their scattering projections for the
    // whole training set (zero initial guesses: r0 = b).
    let step1_start = Instant::now();
    let mut eta_all: Vec<Vec<f64>> = Vec::with_capacity(p_train.len());
    for mu in p_train {
        let bound = ops.evaluate_affine(mu)?;
        let b = bound.scalar_rhs();
        eta_all.push(bound.apply_sigma_s(&b));
    }
    timings.step1 = step1_start.elapsed().as_secs_f64();

    let mut basis = ReducedBasis::new(ops, cfg.window, cfg.eps_rom);
    let mut solutions: Vec<Vec<f64>> = Vec::new();
    let mut residual_trace: Vec<f64> = Vec::new();
    let mut sampled = vec![false; p_train.len()];
    let mut current = initial_idx;
    let stop;

    loop {
        sampled[current] = true;
        let mu = &p_train[current];

        // Step 2(a): high-fidelity solve at the sampled parameter
        let t = Instant::now();
        let bound = ops.evaluate_affine(mu)?;
        let dsa = build_dsa(&bound, cfg.dsa_variant, cfg.dsa_inner_tol, cfg.dsa_inner_max_iter)?;
        let (report, state) = fgmres(&bound, &dsa, &cfg.solver, None)?;
        if !report.converged {
            log::warn!(
                "high-fidelity solve at {mu:?} stopped at relative residual {:.3e} before reaching tol",
                report.residual_history.last().copied().unwrap_or(f64::NAN)
            );
        }
        timings.step2a += t.elapsed().as_secs_f64();

        // Step 2(b): correction snapshots
        let t = Instant::now();
        let zeros = vec![0.0; ops.n_dof()];
        let hist = basis_preimages(&state, &report.solution, &zeros, cfg.window)?;
        let snaps = correction_snapshots(&bound, &hist);
        timings.step2b += t.elapsed().as_secs_f64();
        solutions.push(report.solution);

        // Step 2(c): basis and reduced operator update
        let t = Instant::now();
        let snap_data: Vec<Vec<f64>> = snaps.into_iter().map(|s| s.data).collect();
        basis.ingest(ops, &snap_data, cfg.prenormalize, cfg.eps_qr);
        basis.samples.push(mu.clone());
        timings.step2c += t.elapsed().as_secs_f64();

        if basis.samples.len() >= cfg.max_greedy {
            stop = StopReason::MaxIterations;
            break;
        }
        let unsampled: Vec<usize> = (0..p_train.len()).filter(|&i| !sampled[i]).collect();
        if unsampled.is_empty() {
            stop = StopReason::TrainingSetExhausted;
            break;
        }

        // Step 3: residual indicators over the unsampled parameters
        let t = Instant::now();
        let indicators: Vec<(usize, f64)> = unsampled
            .par_iter()
            .map(|&i| {
                residual_indicator(&basis, ops, &p_train[i], &eta_all[i]).map(|r| (i, r))
            })
            .collect::<Result<Vec<_>>>()?;
        timings.step3 += t.elapsed().as_secs_f64();

        let mut best = indicators[0];
        for &(i, r) in &indicators[1..] {
            if r > best.1 {
                best = (i, r);
            }
        }
        residual_trace.push(best.1);
        if best.1 < cfg.eps_rom {
            stop = StopReason::ResidualBelowTolerance;
            break;
        }
        current = best.0;
    }

    timings.total = total_start.elapsed().as_secs_f64();
    Ok(GreedyOutcome { basis, solutions, timings, residual_trace, stop })
}

/// Wall time of generating correction snapshots for every training
/// parameter (the non-greedy offline baseline): per parameter one
/// DSA-preconditioned FGMRES solve plus the window sweeps.
pub fn all_snapshot_time(
    ops: &DiscreteOperators,
    p_train: &[Vec<f64>],
    cfg: &GreedyConfig,
) -> Result<f64> {
    let start = Instant::now();
    for mu in p_train {
        let bound = ops.evaluate_affine(mu)?;
        let _b = bound.scalar_rhs();
        let dsa = build_dsa(&bound, cfg.dsa_variant, cfg.dsa_inner_tol, cfg.dsa_inner_max_iter)?;
        let (report, state) = fgmres(&bound, &dsa, &cfg.solver, None)?;
        let zeros = vec![0.0; ops.n_dof()];
        let hist = basis_preimages(&state, &report.solution, &zeros, cfg.window)?;
        let _snaps = correction_snapshots(&bound, &hist);
    }
    Ok(start.elapsed().as_secs_f64())
}
