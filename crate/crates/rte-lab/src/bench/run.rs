//! Method dispatch, per-parameter runs and metric aggregation.

use serde::{Deserialize, Serialize};

use super::interp::rbf_interpolate;
use crate::discretization::DiscreteOperators;
use crate::dsa::{build_dsa, DsaVariant};
use crate::rom::{build_romsad, ReducedBasis};
use crate::solvers::{fgmres, gmres_right, source_iteration, SolveReport, SolverConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Si,
    SiDsa,
    SiRomsad,
    GmresDsa,
    GmresDsaInterp,
    FgmresRomsad,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Si,
        Method::SiDsa,
        Method::SiRomsad,
        Method::GmresDsa,
        Method::GmresDsaInterp,
        Method::FgmresRomsad,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Si => "si",
            Method::SiDsa => "si_dsa",
            Method::SiRomsad => "si_romsad",
            Method::GmresDsa => "gmres_dsa",
            Method::GmresDsaInterp => "gmres_dsa_interp",
            Method::FgmresRomsad => "fgmres_romsad",
        }
    }

    pub fn needs_basis(&self) -> bool {
        matches!(self, Method::SiRomsad | Method::FgmresRomsad)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .find(|m| m.name() == s)
            .copied()
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::Config(format!("unknown method '{s}', valid methods are {names:?}"))
            })
    }
}

/// Shared solver/preconditioner settings for a comparison run.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub solver: SolverConfig,
    pub dsa_variant: DsaVariant,
    pub dsa_inner_tol: f64,
    pub dsa_inner_max_iter: usize,
    /// Reduced-correction window for the ROM-backed methods.
    pub window: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            solver: SolverConfig::default(),
            dsa_variant: DsaVariant::FullyConsistent,
            dsa_inner_tol: 1e-12,
            dsa_inner_max_iter: 100_000,
            window: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MuRun {
    pub mu: Vec<f64>,
    pub iterations: usize,
    pub transport_sweeps: f64,
    pub residual_history: Vec<f64>,
    pub final_residual_inf: f64,
    pub wall_seconds: f64,
    pub converged: bool,
}

impl MuRun {
    fn from_report(mu: &[f64], report: &SolveReport) -> Self {
        MuRun {
            mu: mu.to_vec(),
            iterations: report.iterations,
            transport_sweeps: report.transport_sweeps,
            residual_history: report.residual_history.clone(),
            final_residual_inf: report.final_residual_inf,
            wall_seconds: report.wall_seconds,
            converged: report.converged,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    /// Mean transport sweeps over the test set.
    pub n_sweep: f64,
    /// Mean wall time as a percentage of the baseline method's.
    pub t_rel_percent: f64,
    /// Mean final infinity-norm residual.
    pub r_inf: f64,
    /// Any non-converged run marks the row.
    pub starred: bool,
    pub runs: Vec<MuRun>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub baseline: String,
    pub rows: Vec<MethodRow>,
}

/// Run each method over the test set and aggregate table-style metrics.
/// `basis` backs the ROM methods; `interp_data` backs the interpolated
/// initial guess.  Relative times are normalized by the baseline method
/// (`gmres_dsa` when present, else the first method listed).
pub fn run_comparison(
    ops: &DiscreteOperators,
    methods: &[Method],
    p_test: &[Vec<f64>],
    basis: Option<&ReducedBasis>,
    interp_data: Option<&[(Vec<f64>, Vec<f64>)]>,
    settings: &RunSettings,
) -> Result<BenchmarkReport> {
    if methods.is_empty() {
        return Err(Error::Config("no methods requested".into()));
    }
    if p_test.is_empty() {
        return Err(Error::Config("empty test parameter set".into()));
    }
    for m in methods {
        if m.needs_basis() && basis.is_none() {
            return Err(Error::Config(format!(
                "method '{}' needs a trained reduced basis; train one first",
                m.name()
            )));
        }
        if *m == Method::GmresDsaInterp && interp_data.map_or(true, |d| d.is_empty()) {
            return Err(Error::Config(
                "gmres_dsa_interp needs stored high-fidelity sample solutions".into(),
            ));
        }
    }

    let mut raw: Vec<(Method, Vec<MuRun>)> = Vec::with_capacity(methods.len());
    for &method in methods {
        let mut runs = Vec::with_capacity(p_test.len());
        for mu in p_test {
            let report = run_single(ops, method, mu, basis, interp_data, settings)?;
            runs.push(MuRun::from_report(mu, &report));
        }
        raw.push((method, runs));
    }

    let baseline = methods
        .iter()
        .copied()
        .find(|m| *m == Method::GmresDsa)
        .unwrap_or(methods[0]);
    let mean = |v: &[MuRun], f: &dyn Fn(&MuRun) -> f64| -> f64 {
        v.iter().map(|r| f(r)).sum::<f64>() / v.len() as f64
    };
    let baseline_time = raw
        .iter()
        .find(|(m, _)| *m == baseline)
        .map(|(_, runs)| mean(runs, &|r| r.wall_seconds))
        .unwrap_or(1.0);

    let rows = raw
        .into_iter()
        .map(|(method, runs)| MethodRow {
            method: method.name().to_string(),
            n_sweep: mean(&runs, &|r| r.transport_sweeps),
            t_rel_percent: 100.0 * mean(&runs, &|r| r.wall_seconds) / baseline_time,
            r_inf: mean(&runs, &|r| r.final_residual_inf),
            starred: runs.iter().any(|r| !r.converged),
            runs,
        })
        .collect();
    Ok(BenchmarkReport { baseline: baseline.name().to_string(), rows })
}

/// Solve one parameter with one method.
pub fn run_single(
    ops: &DiscreteOperators,
    method: Method,
    mu: &[f64],
    basis: Option<&ReducedBasis>,
    interp_data: Option<&[(Vec<f64>, Vec<f64>)]>,
    settings: &RunSettings,
) -> Result<SolveReport> {
    let bound = ops.evaluate_affine(mu)?;
    let dsa = || build_dsa(&bound, settings.dsa_variant, settings.dsa_inner_tol, settings.dsa_inner_max_iter);
    match method {
        Method::Si => source_iteration(&bound, None, &settings.solver, None),
        Method::SiDsa => {
            let p = dsa()?;
            source_iteration(&bound, Some(&p), &settings.solver, None)
        }
        Method::SiRomsad => {
            let romsad = build_romsad(basis.unwrap(), dsa()?, &bound, settings.window)?;
            source_iteration(&bound, Some(&romsad), &settings.solver, None)
        }
        Method::GmresDsa => {
            let p = dsa()?;
            gmres_right(&bound, &p, &settings.solver, None)
        }
        Method::GmresDsaInterp => {
            let guess = rbf_interpolate(interp_data.unwrap(), mu)?;
            let p = dsa()?;
            gmres_right(&bound, &p, &settings.solver, Some(&guess))
        }
        Method::FgmresRomsad => {
            let romsad = build_romsad(basis.unwrap(), dsa()?, &bound, settings.window)?;
            fgmres(&bound, &romsad, &settings.solver, None).map(|(report, _)| report)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        let err = "newton".parse::<Method>().unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("gmres_dsa"), "error should list valid methods: {msg}");
    }

    #[test]
    fn baseline_self_normalizes_to_100_percent() {
        let pf = super::super::problems::make_problem(
            super::super::problems::Family::Lattice,
            super::super::problems::Scale::Desk,
        );
        // shrink for test speed
        let pf = super::super::problems::ProblemFamily { nx: 10, ny: 10, n_theta: 4, n_z: 2, ..pf };
        let ops = pf.build().unwrap();
        let p_test = vec![vec![100.0, 1.0], vec![97.0, 0.7]];
        let report = run_comparison(
            &ops,
            &[Method::GmresDsa],
            &p_test,
            None,
            None,
            &RunSettings::default(),
        )
        .unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!((report.rows[0].t_rel_percent - 100.0).abs() < 1e-9);
        assert!(!report.rows[0].starred);
    }

    #[test]
    fn rom_methods_require_basis() {
        let pf = super::super::problems::make_problem(
            super::super::problems::Family::Lattice,
            super::super::problems::Scale::Desk,
        );
        let pf = super::super::problems::ProblemFamily { nx: 5, ny: 5, n_theta: 2, n_z: 1, ..pf };
        let ops = pf.build().unwrap();
        let err = run_comparison(
            &ops,
            &[Method::FgmresRomsad],
            &[vec![100.0, 1.0]],
            None,
            None,
            &RunSettings::default(),
        );
        assert!(err.is_err());
    }
}
