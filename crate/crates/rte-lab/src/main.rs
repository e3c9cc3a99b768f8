//! Command-line front end: assemble discretizations, run single solves,
//! train reduced bases, evaluate method comparisons over test sets, and
//! convert saved reports to CSV.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use rte_lab::bench::{
    self, load_config, make_parameter_sets, make_problem, Family, Method, ProblemFamily,
    RunConfig, RunSettings, Scale,
};
use rte_lab::dsa::DsaVariant;
use rte_lab::rom::{self, GreedyConfig};
use rte_lab::solvers::SolverConfig;
use rte_lab::{Error, Result};

#[derive(Parser)]
#[command(name = "rte-lab", version, about = "Transport solver laboratory for parametric runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// Problem family: lattice | pin_cell | variable_scattering | parametric_bc
    #[arg(long)]
    problem: String,
    /// Resolution preset: desk | paper
    #[arg(long, default_value = "desk")]
    scale: String,
    /// Optional TOML config overriding the presets
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the discretization and print its dimensions
    Assemble {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Write the summary as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a single parameter point with one method
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        /// si | si_dsa | si_romsad | gmres_dsa | gmres_dsa_interp | fgmres_romsad
        #[arg(long, default_value = "gmres_dsa")]
        method: String,
        /// Comma-separated parameter point; defaults to the box center
        #[arg(long)]
        mu: Option<String>,
        /// Trained basis file (needed by the ROM methods)
        #[arg(long)]
        basis: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a reduced basis with the greedy offline loop
    Train {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Where to store the basis file
        #[arg(long)]
        out: PathBuf,
        /// Random seed for the (unused here, echoed into logs) test draw
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Run a method comparison over a random test set
    Eval {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Methods to compare (repeatable)
        #[arg(long = "method")]
        methods: Vec<String>,
        #[arg(long)]
        basis: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output path stem; writes `<out>.json` and `<out>.csv`
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a saved JSON report to CSV
    Report {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

struct Resolved {
    family: ProblemFamily,
    settings: RunSettings,
    greedy: GreedyConfig,
    n_test: usize,
    seed: u64,
    methods: Vec<Method>,
    oracle_cap: Option<usize>,
}

fn resolve(args: &ProblemArgs) -> Result<Resolved> {
    let cfg: RunConfig = match &args.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let family_name = cfg.problem.name.clone().unwrap_or_else(|| args.problem.clone());
    let family: Family = family_name.parse()?;
    let scale: Scale = cfg.problem.scale.clone().unwrap_or_else(|| args.scale.clone()).parse()?;
    let mut pf = make_problem(family, scale);
    if let Some(nx) = cfg.mesh.nx {
        pf.nx = nx;
    }
    if let Some(ny) = cfg.mesh.ny {
        pf.ny = ny;
    }
    if let Some(nt) = cfg.quadrature.n_theta {
        pf.n_theta = nt;
    }
    if let Some(nz) = cfg.quadrature.n_z {
        pf.n_z = nz;
    }
    if let Some(tol) = cfg.solver.tol {
        pf.tol = tol;
    }
    if let Some(w) = cfg.rom.window {
        pf.window = w;
    }
    if let Some(eps) = cfg.rom.eps {
        pf.eps_rom = eps;
    }
    if let Some(init) = &cfg.rom.initial_sample {
        pf.initial_sample = init.clone();
    }
    if let Some(grid) = &cfg.bench.train_grid {
        pf.train_dims = grid.clone();
    }

    let solver = SolverConfig {
        tol: pf.tol,
        max_iter: cfg.solver.max_iter.unwrap_or(200),
        reorthogonalize: cfg.solver.reorthogonalize.unwrap_or(false),
    };
    let dsa_variant: DsaVariant = cfg.dsa.variant.as_deref().unwrap_or("fc").parse()?;
    let settings = RunSettings {
        solver: solver.clone(),
        dsa_variant,
        dsa_inner_tol: cfg.dsa.inner_tol.unwrap_or(1e-12),
        dsa_inner_max_iter: cfg.dsa.inner_max_iter.unwrap_or(100_000),
        window: pf.window,
    };
    let mut greedy = GreedyConfig::new(pf.window, pf.eps_rom, pf.initial_sample.clone());
    greedy.solver = solver;
    greedy.dsa_variant = dsa_variant;
    greedy.dsa_inner_tol = settings.dsa_inner_tol;
    greedy.dsa_inner_max_iter = settings.dsa_inner_max_iter;
    if let Some(mg) = cfg.rom.max_greedy {
        greedy.max_greedy = mg;
    }
    if let Some(pn) = cfg.rom.prenormalize {
        greedy.prenormalize = pn;
    }

    let methods = match &cfg.bench.methods {
        Some(list) => list.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?,
        None => vec![Method::GmresDsa, Method::FgmresRomsad],
    };
    Ok(Resolved {
        family: pf,
        settings,
        greedy,
        n_test: cfg.bench.n_test.unwrap_or(10),
        seed: cfg.bench.seed.unwrap_or(7),
        methods,
        oracle_cap: cfg.bench.oracle_cap,
    })
}

fn write_or_print(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Assemble { problem, out } => {
            let r = resolve(&problem)?;
            let mut ops = r.family.build()?;
            if let Some(cap) = r.oracle_cap {
                ops.oracle_cap = cap;
            }
            let summary = serde_json::json!({
                "problem": r.family.family.name(),
                "domain": r.family.domain,
                "mesh": { "nx": r.family.nx, "ny": r.family.ny },
                "quadrature": { "n_theta": r.family.n_theta, "n_z": r.family.n_z,
                                 "n_directions": ops.n_dirs() },
                "dg_order": 1,
                "n_dof": ops.n_dof(),
                "system_size": ops.n_dof() * ops.n_dirs(),
                "affine_terms": ops.affine_terms().len(),
                "discretization_hash": rom::discretization_hash(&ops),
            });
            write_or_print(&serde_json::to_string_pretty(&summary).unwrap(), out.as_deref())
        }
        Command::Solve { problem, method, mu, basis, out } => {
            let r = resolve(&problem)?;
            let ops = r.family.build()?;
            let method: Method = method.parse()?;
            let mu: Vec<f64> = match mu {
                Some(text) => text
                    .split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::Config(format!("bad --mu component '{v}': {e}")))
                    })
                    .collect::<Result<Vec<f64>>>()?,
                None => r.family.param_box().center(),
            };
            let loaded;
            let basis_ref = match basis {
                Some(path) => {
                    loaded = rom::load_basis(&path, &ops)?;
                    Some(&loaded)
                }
                None => None,
            };
            let report = bench::run_single(&ops, method, &mu, basis_ref, None, &r.settings)?;
            let summary = serde_json::json!({
                "method": method.name(),
                "mu": mu,
                "converged": report.converged,
                "iterations": report.iterations,
                "transport_sweeps": report.transport_sweeps,
                "final_residual_inf": report.final_residual_inf,
                "relative_residuals": report.residual_history,
                "wall_seconds": report.wall_seconds,
            });
            write_or_print(&serde_json::to_string_pretty(&summary).unwrap(), out.as_deref())
        }
        Command::Train { problem, out, seed } => {
            let r = resolve(&problem)?;
            let ops = r.family.build()?;
            let (train, _) =
                make_parameter_sets(r.family.param_box(), &r.family.train_dims, 0, seed)?;
            let outcome = rom::greedy_train(&ops, &train, &r.greedy)?;
            rom::save_basis(&outcome.basis, &out)?;
            eprintln!(
                "trained basis: r = {}, {} of {} parameters sampled ({:?}), saved to {}",
                outcome.basis.r(),
                outcome.basis.samples.len(),
                train.len(),
                outcome.stop,
                out.display()
            );
            eprintln!(
                "offline timings [s]: step1 {:.3}, step2a {:.3}, step2b {:.3}, step2c {:.3}, step3 {:.3}, total {:.3}",
                outcome.timings.step1,
                outcome.timings.step2a,
                outcome.timings.step2b,
                outcome.timings.step2c,
                outcome.timings.step3,
                outcome.timings.total
            );
            Ok(())
        }
        Command::Eval { problem, methods, basis, seed, out } => {
            let r = resolve(&problem)?;
            let ops = r.family.build()?;
            let methods: Vec<Method> = if methods.is_empty() {
                r.methods.clone()
            } else {
                methods.iter().map(|m| m.parse()).collect::<Result<Vec<_>>>()?
            };
            let (train, test) =
                make_parameter_sets(r.family.param_box(), &r.family.train_dims, r.n_test, seed)?;
            let needs_basis = methods.iter().any(|m| m.needs_basis());
            let needs_interp = methods.contains(&Method::GmresDsaInterp);
            let mut loaded_basis = None;
            let mut interp_data: Option<Vec<(Vec<f64>, Vec<f64>)>> = None;
            if let Some(path) = basis {
                loaded_basis = Some(rom::load_basis(&path, &ops)?);
            } else if needs_basis || needs_interp {
                eprintln!("no --basis given; training one now");
                let outcome = rom::greedy_train(&ops, &train, &r.greedy)?;
                if needs_interp {
                    interp_data = Some(
                        outcome
                            .basis
                            .samples
                            .iter()
                            .cloned()
                            .zip(outcome.solutions.iter().cloned())
                            .collect(),
                    );
                }
                loaded_basis = Some(outcome.basis);
            }
            if needs_interp && interp_data.is_none() {
                return Err(Error::Config(
                    "gmres_dsa_interp needs sample solutions; run eval without --basis so training provides them".into(),
                ));
            }
            let report = bench::run_comparison(
                &ops,
                &methods,
                &test,
                loaded_basis.as_ref(),
                interp_data.as_deref(),
                &r.settings,
            )?;
            let csv = bench::report_to_csv(&report);
            match out {
                Some(stem) => {
                    let json_path = stem.with_extension("json");
                    let csv_path = stem.with_extension("csv");
                    std::fs::write(&json_path, bench::report_to_json(&report)?)?;
                    std::fs::write(&csv_path, &csv)?;
                    eprintln!("wrote {} and {}", json_path.display(), csv_path.display());
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Report { input, out } => {
            let text = std::fs::read_to_string(&input)?;
            let report: bench::BenchmarkReport = serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("cannot parse {}: {e}", input.display())))?;
            write_or_print(&bench::report_to_csv(&report), out.as_deref())
        }
    }
}
