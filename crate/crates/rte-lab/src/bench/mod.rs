//! Benchmark catalog, comparison runner, metrics and exports.

mod config;
mod export;
mod interp;
mod problems;
mod run;

pub use config::{load_config, RunConfig};
pub use export::{report_to_csv, report_to_json};
pub use interp::rbf_interpolate;
pub use problems::{make_parameter_sets, make_problem, Family, ProblemFamily, Scale};
pub use run::{run_comparison, run_single, BenchmarkReport, Method, MethodRow, MuRun, RunSettings};
