//! TOML run configuration: every section is optional and overrides the
//! family/scale presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub dsa: DsaSection,
    #[serde(default)]
    pub rom: RomSection,
    #[serde(default)]
    pub bench: BenchSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ProblemSection {
    pub name: Option<String>,
    pub scale: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MeshSection {
    pub nx: Option<usize>,
    pub ny: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct QuadratureSection {
    pub n_theta: Option<usize>,
    pub n_z: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolverSection {
    pub method: Option<String>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub reorthogonalize: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DsaSection {
    /// `fc` or `pc`.
    pub variant: Option<String>,
    pub inner_tol: Option<f64>,
    pub inner_max_iter: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RomSection {
    pub window: Option<usize>,
    pub eps: Option<f64>,
    pub max_greedy: Option<usize>,
    pub initial_sample: Option<Vec<f64>>,
    pub prenormalize: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BenchSection {
    pub n_test: Option<usize>,
    pub seed: Option<u64>,
    pub baseline: Option<String>,
    pub methods: Option<Vec<String>>,
    pub train_grid: Option<Vec<usize>>,
    pub oracle_cap: Option<usize>,
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("bad config {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = r#"
            [problem]
            name = "lattice"
            scale = "desk"
            [mesh]
            nx = 20
            ny = 20
            [quadrature]
            n_theta = 8
            n_z = 2
            [solver]
            method = "gmres_dsa"
            tol = 1e-11
            max_iter = 150
            [dsa]
            variant = "pc"
            inner_tol = 1e-12
            [rom]
            window = 2
            eps = 1e-8
            max_greedy = 30
            initial_sample = [100.0, 1.0]
            prenormalize = true
            [bench]
            n_test = 10
            seed = 7
            methods = ["gmres_dsa", "fgmres_romsad"]
            train_grid = [5, 5]
        "#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.problem.name.as_deref(), Some("lattice"));
        assert_eq!(cfg.mesh.nx, Some(20));
        assert_eq!(cfg.dsa.variant.as_deref(), Some("pc"));
        assert_eq!(cfg.rom.initial_sample, Some(vec![100.0, 1.0]));
        assert_eq!(cfg.bench.train_grid, Some(vec![5, 5]));
    }

    #[test]
    fn empty_config_is_fine() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert!(cfg.problem.name.is_none());
        assert!(cfg.solver.tol.is_none());
    }
}
