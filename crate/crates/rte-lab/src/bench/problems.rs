//! The parametric benchmark catalog: four problem families with
//! paper-scale and desk-scale presets, plus training/test parameter set
//! generation.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretization::{
    assemble, CrossSectionPiece, DgBasis, DiscreteOperators, InflowPiece, MaterialField, Mesh2D,
    ParamBox,
};
use crate::quadrature::AngularQuadrature;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Lattice,
    PinCell,
    VariableScattering,
    ParametricBc,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Lattice,
        Family::PinCell,
        Family::VariableScattering,
        Family::ParametricBc,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Lattice => "lattice",
            Family::PinCell => "pin_cell",
            Family::VariableScattering => "variable_scattering",
            Family::ParametricBc => "parametric_bc",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .iter()
            .find(|f| f.name() == s)
            .copied()
            .ok_or_else(|| {
                let names: Vec<_> = Family::ALL.iter().map(|f| f.name()).collect();
                Error::Config(format!("unknown problem '{s}', expected one of {names:?}"))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// Resolutions used for the published tables.
    Paper,
    /// Shrunk presets sized for minutes-scale test runs.
    Desk,
}

impl std::str::FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Scale::Paper),
            "desk" => Ok(Scale::Desk),
            other => Err(Error::Config(format!("unknown scale '{other}', expected 'paper' or 'desk'"))),
        }
    }
}

/// A fully specified parametric problem plus its training defaults.
pub struct ProblemFamily {
    pub family: Family,
    pub domain: [f64; 4],
    pub material: MaterialField,
    pub nx: usize,
    pub ny: usize,
    pub n_theta: usize,
    pub n_z: usize,
    /// Training grid points per parameter dimension.
    pub train_dims: Vec<usize>,
    pub window: usize,
    pub eps_rom: f64,
    pub initial_sample: Vec<f64>,
    pub tol: f64,
}

impl ProblemFamily {
    /// Assemble the discrete operators at the preset resolution.
    pub fn build(&self) -> Result<DiscreteOperators> {
        let mesh = Mesh2D::new(self.domain, self.nx, self.ny)?;
        let basis = DgBasis::new(1)?;
        let quad = AngularQuadrature::chebyshev_legendre(self.n_theta, self.n_z)?;
        assemble(mesh, basis, quad, &self.material)
    }

    pub fn param_box(&self) -> &ParamBox {
        &self.material.param_box
    }
}

pub fn make_problem(family: Family, scale: Scale) -> ProblemFamily {
    match family {
        Family::Lattice => lattice(scale),
        Family::PinCell => pin_cell(scale),
        Family::VariableScattering => variable_scattering(scale),
        Family::ParametricBc => parametric_bc(scale),
    }
}

/// Checkerboard of pure absorbers around a central unit source cell on
/// [0,5]^2: unit cells with odd index parity absorb (`sigma_a = mu_a`),
/// the rest scatter (`sigma_s = mu_s`).
fn lattice(scale: Scale) -> ProblemFamily {
    let absorber = |x: f64, y: f64| -> bool {
        let ci = (x.floor() as i64).clamp(0, 4);
        let cj = (y.floor() as i64).clamp(0, 4);
        (ci + cj) % 2 == 1
    };
    let material = MaterialField {
        scattering: vec![CrossSectionPiece::new(
            |mu: &[f64]| mu[1],
            move |x, y| if absorber(x, y) { 0.0 } else { 1.0 },
        )],
        absorption: vec![CrossSectionPiece::new(
            |mu: &[f64]| mu[0],
            move |x, y| if absorber(x, y) { 1.0 } else { 0.0 },
        )],
        source: Arc::new(|x, y| {
            if (x - 2.5).abs() < 0.5 && (y - 2.5).abs() < 0.5 {
                1.0
            } else {
                0.0
            }
        }),
        inflow: Vec::new(),
        param_box: ParamBox::new(vec![95.0, 0.5], vec![105.0, 1.5]),
    };
    let (nx, nt, nz, train) = match scale {
        Scale::Paper => (80, 40, 6, vec![11, 11]),
        Scale::Desk => (40, 16, 4, vec![5, 5]),
    };
    ProblemFamily {
        family: Family::Lattice,
        domain: [0.0, 5.0, 0.0, 5.0],
        material,
        nx,
        ny: nx,
        n_theta: nt,
        n_z: nz,
        train_dims: train,
        window: 2,
        eps_rom: 1e-8,
        initial_sample: vec![100.0, 1.0],
        tol: 1e-11,
    }
}

/// Weakly scattering/absorbing inner cell embedded in a strong scatterer
/// (`sigma_s = 100`) on [-1,1]^2 with a Gaussian source.
fn pin_cell(scale: Scale) -> ProblemFamily {
    let inner = |x: f64, y: f64| x.abs() <= 0.5 && y.abs() <= 0.5;
    let material = MaterialField {
        scattering: vec![
            CrossSectionPiece::new(|mu: &[f64]| mu[1], move |x, y| if inner(x, y) { 1.0 } else { 0.0 }),
            CrossSectionPiece::new(|_: &[f64]| 1.0, move |x, y| if inner(x, y) { 0.0 } else { 100.0 }),
        ],
        absorption: vec![CrossSectionPiece::new(
            |mu: &[f64]| mu[0],
            move |x, y| if inner(x, y) { 1.0 } else { 0.0 },
        )],
        source: Arc::new(|x, y| (-100.0 * (x * x + y * y)).exp()),
        inflow: Vec::new(),
        param_box: ParamBox::new(vec![0.05, 0.05], vec![0.5, 0.5]),
    };
    let (nx, nt, nz) = match scale {
        Scale::Paper => (80, 30, 6),
        Scale::Desk => (32, 8, 4),
    };
    ProblemFamily {
        family: Family::PinCell,
        domain: [-1.0, 1.0, -1.0, 1.0],
        material,
        nx,
        ny: nx,
        n_theta: nt,
        n_z: nz,
        train_dims: vec![5, 5],
        window: 2,
        eps_rom: 1e-10,
        initial_sample: vec![0.275, 0.275],
        tol: 1e-11,
    }
}

/// Smooth transition from a transparent center to strong scattering at
/// the boundary; `mu_s` controls the transition strength.
fn variable_scattering(scale: Scale) -> ProblemFamily {
    let material = MaterialField {
        scattering: vec![
            CrossSectionPiece::new(
                |mu: &[f64]| mu[0],
                |x, y| {
                    let r2 = x * x + y * y;
                    if r2 <= 1.0 {
                        r2 * r2 * (2.0 - r2) * (2.0 - r2)
                    } else {
                        1.0
                    }
                },
            ),
            CrossSectionPiece::new(|_: &[f64]| 0.1, |_, _| 1.0),
        ],
        absorption: Vec::new(),
        source: Arc::new(|x, y| 10.0 / std::f64::consts::PI * (-100.0 * (x * x + y * y)).exp()),
        inflow: Vec::new(),
        param_box: ParamBox::new(vec![49.9], vec![99.9]),
    };
    let (nx, nt, nz, train) = match scale {
        Scale::Paper => (80, 30, 6, vec![51]),
        Scale::Desk => (32, 8, 4, vec![13]),
    };
    ProblemFamily {
        family: Family::VariableScattering,
        domain: [-1.0, 1.0, -1.0, 1.0],
        material,
        nx,
        ny: nx,
        n_theta: nt,
        n_z: nz,
        train_dims: train,
        window: 2,
        eps_rom: 1e-9,
        initial_sample: vec![74.9],
        tol: 1e-11,
    }
}

/// Two-material box driven by a parametric inflow on the left boundary:
/// the inner cell scatters with `sigma_s = mu_s`, the outer region
/// absorbs with `sigma_a = 1`, and `psi = mu_bc` enters where
/// `Omega_x > 0` at `x = -1`.
fn parametric_bc(scale: Scale) -> ProblemFamily {
    let inner = |x: f64, y: f64| x.abs() <= 0.5 && y.abs() <= 0.5;
    let material = MaterialField {
        scattering: vec![CrossSectionPiece::new(
            |mu: &[f64]| mu[0],
            move |x, y| if inner(x, y) { 1.0 } else { 0.0 },
        )],
        absorption: vec![CrossSectionPiece::new(
            |_: &[f64]| 1.0,
            move |x, y| if inner(x, y) { 0.0 } else { 1.0 },
        )],
        source: Arc::new(|_, _| 0.0),
        inflow: vec![InflowPiece::new(
            |mu: &[f64]| mu[1],
            |x, _y, omega| {
                if x <= -1.0 + 1e-12 && omega[0] > 0.0 {
                    1.0
                } else {
                    0.0
                }
            },
        )],
        param_box: ParamBox::new(vec![1.0, 0.5], vec![5.0, 1.5]),
    };
    let (nx, nt, nz, train) = match scale {
        Scale::Paper => (64, 60, 6, vec![9, 11]),
        Scale::Desk => (32, 16, 4, vec![5, 5]),
    };
    ProblemFamily {
        family: Family::ParametricBc,
        domain: [-1.0, 1.0, -1.0, 1.0],
        material,
        nx,
        ny: nx,
        n_theta: nt,
        n_z: nz,
        train_dims: train,
        window: 2,
        eps_rom: 1e-9,
        initial_sample: vec![3.0, 1.0],
        tol: 1e-11,
    }
}

/// Uniform tensor training grid plus a seeded random test set drawn from
/// the parameter box, rejecting points that collide with training points.
pub fn make_parameter_sets(
    pbox: &ParamBox,
    train_dims: &[usize],
    n_test: usize,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let d = pbox.dim();
    if train_dims.len() != d {
        return Err(Error::Config(format!(
            "training grid has {} dimensions, parameter box has {d}",
            train_dims.len()
        )));
    }
    if train_dims.iter().any(|&n| n == 0) {
        return Err(Error::Config("training grid needs at least one point per dimension".into()));
    }
    for (lo, hi) in pbox.lo.iter().zip(&pbox.hi) {
        if !(hi > lo) {
            return Err(Error::Config(format!("degenerate parameter box [{lo}, {hi}]")));
        }
    }
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let n = train_dims[k];
            (0..n)
                .map(|i| {
                    if n == 1 {
                        0.5 * (pbox.lo[k] + pbox.hi[k])
                    } else {
                        pbox.lo[k] + (pbox.hi[k] - pbox.lo[k]) * i as f64 / (n - 1) as f64
                    }
                })
                .collect()
        })
        .collect();
    let total: usize = train_dims.iter().product();
    let mut train = Vec::with_capacity(total);
    for flat in 0..total {
        let mut idx = flat;
        let mut mu = Vec::with_capacity(d);
        for axis in &axes {
            mu.push(axis[idx % axis.len()]);
            idx /= axis.len();
        }
        train.push(mu);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::with_capacity(n_test);
    while test.len() < n_test {
        let mu: Vec<f64> = (0..d).map(|k| rng.gen_range(pbox.lo[k]..pbox.hi[k])).collect();
        let collides = train.iter().any(|t| {
            t.iter().zip(&mu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() < 1e-9
        });
        if !collides {
            test.push(mu);
        }
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_scale_presets_match_published_setups() {
        let l = make_problem(Family::Lattice, Scale::Paper);
        assert_eq!((l.nx, l.ny, l.n_theta, l.n_z), (80, 80, 40, 6));
        assert_eq!(l.tol, 1e-11);
        let p = make_problem(Family::PinCell, Scale::Paper);
        assert_eq!((p.nx, p.n_theta, p.n_z), (80, 30, 6));
        let b = make_problem(Family::ParametricBc, Scale::Paper);
        assert_eq!((b.nx, b.n_theta, b.n_z), (64, 60, 6));
        assert_eq!(b.train_dims, vec![9, 11]);
    }

    #[test]
    fn lattice_materials_split_by_parity() {
        let l = make_problem(Family::Lattice, Scale::Desk);
        let mu = [100.0, 1.0];
        // absorber cell (1,0): centers near (1.5, 0.5)
        assert_eq!(l.material.sigma_a(1.5, 0.5, &mu), 100.0);
        assert_eq!(l.material.sigma_s(1.5, 0.5, &mu), 0.0);
        // scatterer at the center cell
        assert_eq!(l.material.sigma_a(2.5, 2.5, &mu), 0.0);
        assert_eq!(l.material.sigma_s(2.5, 2.5, &mu), 1.0);
        assert_eq!((l.material.source)(2.5, 2.5), 1.0);
        assert_eq!((l.material.source)(0.5, 0.5), 0.0);
    }

    #[test]
    fn pin_cell_regions_bind_as_published() {
        let p = make_problem(Family::PinCell, Scale::Desk);
        let mu = [0.065886, 0.11397];
        assert!((p.material.sigma_a(0.0, 0.0, &mu) - 0.065886).abs() < 1e-15);
        assert!((p.material.sigma_s(0.0, 0.0, &mu) - 0.11397).abs() < 1e-15);
        assert_eq!(p.material.sigma_s(0.8, 0.0, &mu), 100.0);
        assert_eq!(p.material.sigma_a(0.8, 0.0, &mu), 0.0);
    }

    #[test]
    fn variable_scattering_profile_values() {
        let v = make_problem(Family::VariableScattering, Scale::Desk);
        let mu = [99.9];
        // center: only the floor 0.1
        assert!((v.material.sigma_s(0.0, 0.0, &mu) - 0.1).abs() < 1e-15);
        // r = 1: mu_s * 1 * (2-1)^2 + 0.1
        assert!((v.material.sigma_s(1.0, 0.0, &mu) - 100.0).abs() < 1e-12);
        assert_eq!(v.material.sigma_a(0.3, 0.3, &mu), 0.0);
    }

    #[test]
    fn parameter_sets_are_disjoint_and_reproducible() {
        let pf = make_problem(Family::Lattice, Scale::Desk);
        let (train, test) =
            make_parameter_sets(pf.param_box(), &pf.train_dims, 10, 7).unwrap();
        assert_eq!(train.len(), 25);
        assert_eq!(test.len(), 10);
        assert!(train.iter().any(|mu| mu == &pf.initial_sample));
        for t in &test {
            for tr in &train {
                let d: f64 =
                    t.iter().zip(tr).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                assert!(d >= 1e-9);
            }
        }
        let (train2, test2) =
            make_parameter_sets(pf.param_box(), &pf.train_dims, 10, 7).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);
        let (_, test3) = make_parameter_sets(pf.param_box(), &pf.train_dims, 10, 8).unwrap();
        assert_ne!(test, test3);
    }

    #[test]
    fn unknown_family_name_is_rejected() {
        assert!("not_a_problem".parse::<Family>().is_err());
        assert!("lattice".parse::<Family>().is_ok());
    }
}
