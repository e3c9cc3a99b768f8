//! Report serialization: CSV mirrors the comparison tables, JSON carries
//! the per-run residual histories.

use super::run::BenchmarkReport;
use crate::{Error, Result};

/// Fixed-order CSV: `method,n_sweep,t_rel_percent,r_inf,starred`.
pub fn report_to_csv(report: &BenchmarkReport) -> String {
    let mut out = String::from("method,n_sweep,t_rel_percent,r_inf,starred\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{:.4},{:.2},{:.6e},{}\n",
            row.method, row.n_sweep, row.t_rel_percent, row.r_inf, row.starred
        ));
    }
    out
}

pub fn report_to_json(report: &BenchmarkReport) -> Result<String> {
    serde_json::to_string_pretty(report)
        .map_err(|e| Error::Format(format!("report serialization failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::super::run::{BenchmarkReport, MethodRow, MuRun};
    use super::*;

    fn sample_report() -> BenchmarkReport {
        BenchmarkReport {
            baseline: "gmres_dsa".into(),
            rows: vec![MethodRow {
                method: "gmres_dsa".into(),
                n_sweep: 10.7,
                t_rel_percent: 100.0,
                r_inf: 1.01e-12,
                starred: false,
                runs: vec![MuRun {
                    mu: vec![100.0, 1.0],
                    iterations: 10,
                    transport_sweeps: 11.0,
                    residual_history: vec![1.0, 0.1, 1e-12],
                    final_residual_inf: 1.01e-12,
                    wall_seconds: 0.5,
                    converged: true,
                }],
            }],
        }
    }

    #[test]
    fn csv_has_fixed_header_order() {
        let csv = report_to_csv(&sample_report());
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "method,n_sweep,t_rel_percent,r_inf,starred");
        let row = lines.next().unwrap();
        assert!(row.starts_with("gmres_dsa,10.7"));
    }

    #[test]
    fn json_round_trips_and_keeps_histories() {
        let json = report_to_json(&sample_report()).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        let hist = &parsed["rows"][0]["runs"][0]["residual_history"];
        assert_eq!(hist.as_array().unwrap().len(), 3);
    }
}
