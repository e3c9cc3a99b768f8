//! Diffusion synthetic acceleration.
//!
//! The correction operator is derived at the discrete level: expand the
//! per-direction correction in a P1 ansatz `dpsi = dphi + 3 O . dJ`,
//! take the zeroth and per-axis first angular moments of the upwind DG
//! correction equations, and eliminate each current component with its
//! own axis equation.  Splitting the upwind stencil into its central
//! (skew) and jump (symmetric) parts per axis gives
//!
//! ```text
//! C = Sigma_a + m1x Jx + m1y Jy
//!     + 3 c2x^2 Cx^T Ex^{-1} Cx + 3 c2y^2 Cy^T Ey^{-1} Cy,
//! Ex = 3 c2x Sigma_t + 3 m3x Jx      (fully consistent)
//! Ex = 3 c2x Sigma_t                 (partially consistent)
//! ```
//!
//! with the discrete moments `c2 = sum w O_a^2`, `m1 = sum w |O_a|`,
//! `m3 = sum w |O_a|^3` taken from the angular rule.  The elimination is
//! done per axis, so `Ex` couples cells along mesh rows only and the
//! Schur terms stay block dense per row/column.  Jump operators carry
//! the zero-inflow boundary data as boundary penalties, which keeps `C`
//! symmetric positive definite; the preconditioner application
//! `r + C^{-1} Sigma_s r` solves with conjugate gradients under a
//! symmetric Gauss-Seidel preconditioner.

use crate::discretization::BoundOperators;
use crate::linalg::{pcg_sgs, CsrMatrix, DenseMatrix};
use crate::solvers::{PrecondTag, Preconditioner};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsaVariant {
    FullyConsistent,
    PartiallyConsistent,
}

impl std::str::FromStr for DsaVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fc" => Ok(DsaVariant::FullyConsistent),
            "pc" => Ok(DsaVariant::PartiallyConsistent),
            other => Err(Error::Config(format!(
                "unknown DSA variant '{other}', expected 'fc' or 'pc'"
            ))),
        }
    }
}

/// Assembled diffusion correction operator bound at one parameter.
pub struct DsaPreconditioner {
    pub variant: DsaVariant,
    matrix: CsrMatrix,
    sigma_s_dof: Vec<f64>,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
}

impl DsaPreconditioner {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Solve `C x = rhs` with the configured inner solver.
    pub fn solve_diffusion(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        pcg_sgs(&self.matrix, rhs, self.inner_tol, self.inner_max_iter)
    }
}

impl Preconditioner for DsaPreconditioner {
    fn apply(&self, _iteration: usize, r: &[f64]) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = self.sigma_s_dof.iter().zip(r).map(|(s, x)| s * x).collect();
        let correction = self.solve_diffusion(&rhs)?;
        Ok(r.iter().zip(&correction).map(|(a, b)| a + b).collect())
    }

    fn is_linear(&self) -> bool {
        true
    }

    fn tag(&self, _iteration: usize) -> PrecondTag {
        PrecondTag::Dsa
    }
}

/// Assemble the diffusion correction operator for the bound parameter.
pub fn build_dsa(
    bound: &BoundOperators,
    variant: DsaVariant,
    inner_tol: f64,
    inner_max_iter: usize,
) -> Result<DsaPreconditioner> {
    let ops = bound.ops;
    let m = ops.dofs_per_cell();
    let n_dof = ops.n_dof();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();

    // absorption mass
    for (c, &sa) in bound.sigma_a_cells.iter().enumerate() {
        if sa != 0.0 {
            for l in 0..m {
                triplets.push((c * m + l, c * m + l, sa));
            }
        }
    }

    for axis in 0..2 {
        let (c2, m1, m3) = ops.quad.axis_moments(axis);
        if c2 == 0.0 {
            // all directions tangent to this axis: no transport along it
            continue;
        }
        // jump term of the zeroth moment
        append_scaled(&mut triplets, &jump_triplets(bound, axis), m1);
        // Schur term of the per-axis current elimination
        triplets.extend(schur_triplets(bound, axis, variant, c2, m3)?);
    }

    let matrix = CsrMatrix::from_triplets(n_dof, &mut triplets);
    let asym = matrix.asymmetry();
    if asym > 1e-10 {
        return Err(Error::Numerics(format!(
            "assembled DSA operator lost symmetry: max |C - C^T| = {asym:.3e}"
        )));
    }
    let mut sigma_s_dof = vec![0.0; n_dof];
    for (c, &s) in bound.sigma_s_cells.iter().enumerate() {
        for l in 0..m {
            sigma_s_dof[c * m + l] = s;
        }
    }
    Ok(DsaPreconditioner { variant, matrix, sigma_s_dof, inner_tol, inner_max_iter })
}

fn append_scaled(
    out: &mut Vec<(usize, usize, f64)>,
    entries: &[(usize, usize, f64)],
    scale: f64,
) {
    out.extend(entries.iter().map(|&(i, j, v)| (i, j, scale * v)));
}

/// Central (skew) and jump (symmetric) stencil halves for one axis.
pub(crate) struct AxisStencil {
    pub central_diag: DenseMatrix,
    pub central_up: DenseMatrix,
    pub central_down: DenseMatrix,
    pub jump_diag: DenseMatrix,
    pub jump_up: DenseMatrix,
    pub jump_down: DenseMatrix,
}

pub(crate) fn axis_stencil(bound: &BoundOperators, axis: usize) -> AxisStencil {
    let ops = bound.ops;
    let m = ops.dofs_per_cell();
    let (p_diag, p_coup, m_diag, m_coup) = if axis == 0 {
        (&ops.xp_diag, &ops.xp_coup, &ops.xm_diag, &ops.xm_coup)
    } else {
        (&ops.yp_diag, &ops.yp_coup, &ops.ym_diag, &ops.ym_coup)
    };
    let mut central_diag = DenseMatrix::zeros(m, m);
    let mut jump_diag = DenseMatrix::zeros(m, m);
    let mut central_up = DenseMatrix::zeros(m, m); // coupling to the previous cell along the axis
    let mut jump_up = DenseMatrix::zeros(m, m);
    let mut central_down = DenseMatrix::zeros(m, m); // coupling to the next cell
    let mut jump_down = DenseMatrix::zeros(m, m);
    for r in 0..m {
        for c in 0..m {
            central_diag[(r, c)] = 0.5 * (p_diag[(r, c)] - m_diag[(r, c)]);
            jump_diag[(r, c)] = 0.5 * (p_diag[(r, c)] + m_diag[(r, c)]);
            central_up[(r, c)] = 0.5 * p_coup[(r, c)];
            jump_up[(r, c)] = 0.5 * p_coup[(r, c)];
            central_down[(r, c)] = -0.5 * m_coup[(r, c)];
            jump_down[(r, c)] = 0.5 * m_coup[(r, c)];
        }
    }
    AxisStencil { central_diag, central_up, central_down, jump_diag, jump_up, jump_down }
}

/// Global jump operator for one axis as triplets (includes the boundary
/// penalty blocks).
pub(crate) fn jump_triplets(bound: &BoundOperators, axis: usize) -> Vec<(usize, usize, f64)> {
    let ops = bound.ops;
    let mesh = &ops.mesh;
    let m = ops.dofs_per_cell();
    let st = axis_stencil(bound, axis);
    let mut trip = Vec::new();
    let push_block = |trip: &mut Vec<(usize, usize, f64)>, row_cell: usize, col_cell: usize, b: &DenseMatrix| {
        for r in 0..m {
            for c in 0..m {
                let v = b[(r, c)];
                if v != 0.0 {
                    trip.push((row_cell * m + r, col_cell * m + c, v));
                }
            }
        }
    };
    for cell in 0..mesh.n_cells() {
        let (ix, iy) = mesh.cell_coords(cell);
        push_block(&mut trip, cell, cell, &st.jump_diag);
        let (prev, next) = neighbors(mesh, ix, iy, axis);
        if let Some(p) = prev {
            push_block(&mut trip, cell, p, &st.jump_up);
        }
        if let Some(n) = next {
            push_block(&mut trip, cell, n, &st.jump_down);
        }
    }
    trip
}

fn neighbors(
    mesh: &crate::discretization::Mesh2D,
    ix: usize,
    iy: usize,
    axis: usize,
) -> (Option<usize>, Option<usize>) {
    if axis == 0 {
        (
            (ix > 0).then(|| mesh.cell_index(ix - 1, iy)),
            (ix + 1 < mesh.nx).then(|| mesh.cell_index(ix + 1, iy)),
        )
    } else {
        (
            (iy > 0).then(|| mesh.cell_index(ix, iy - 1)),
            (iy + 1 < mesh.ny).then(|| mesh.cell_index(ix, iy + 1)),
        )
    }
}

/// `3 c2^2 C^T E^{-1} C` for one axis, assembled densely per mesh line
/// (row for axis x, column for axis y) and symmetrized against roundoff.
pub(crate) fn schur_triplets(
    bound: &BoundOperators,
    axis: usize,
    variant: DsaVariant,
    c2: f64,
    m3: f64,
) -> Result<Vec<(usize, usize, f64)>> {
    let ops = bound.ops;
    let mesh = &ops.mesh;
    let m = ops.dofs_per_cell();
    let st = axis_stencil(bound, axis);
    let (lines, line_len) = if axis == 0 { (mesh.ny, mesh.nx) } else { (mesh.nx, mesh.ny) };
    let n_line = line_len * m;
    let mut triplets = Vec::new();

    for line in 0..lines {
        let cell_at = |pos: usize| {
            if axis == 0 {
                mesh.cell_index(pos, line)
            } else {
                mesh.cell_index(line, pos)
            }
        };
        let mut e = DenseMatrix::zeros(n_line, n_line);
        let mut central = DenseMatrix::zeros(n_line, n_line);
        for pos in 0..line_len {
            let cell = cell_at(pos);
            let sigma_t = bound.sigma_t_cells[cell];
            for r in 0..m {
                for c in 0..m {
                    let i = pos * m + r;
                    let j = pos * m + c;
                    central[(i, j)] = st.central_diag[(r, c)];
                    if variant == DsaVariant::FullyConsistent {
                        e[(i, j)] = 3.0 * m3 * st.jump_diag[(r, c)];
                    }
                }
                let i = pos * m + r;
                e[(i, i)] += 3.0 * c2 * sigma_t;
            }
            if pos > 0 {
                for r in 0..m {
                    for c in 0..m {
                        let i = pos * m + r;
                        let j = (pos - 1) * m + c;
                        central[(i, j)] = st.central_up[(r, c)];
                        if variant == DsaVariant::FullyConsistent {
                            e[(i, j)] = 3.0 * m3 * st.jump_up[(r, c)];
                        }
                    }
                }
            }
            if pos + 1 < line_len {
                for r in 0..m {
                    for c in 0..m {
                        let i = pos * m + r;
                        let j = (pos + 1) * m + c;
                        central[(i, j)] = st.central_down[(r, c)];
                        if variant == DsaVariant::FullyConsistent {
                            e[(i, j)] = 3.0 * m3 * st.jump_down[(r, c)];
                        }
                    }
                }
            }
        }
        let lu = e.lu().map_err(|_| {
            Error::Numerics(format!("singular current-elimination block on line {line} (axis {axis})"))
        })?;
        // Y = E^{-1} C, column by column
        let mut y = DenseMatrix::zeros(n_line, n_line);
        let mut col = vec![0.0; n_line];
        for j in 0..n_line {
            for (i, c) in col.iter_mut().enumerate() {
                *c = central[(i, j)];
            }
            let sol = lu.solve(&col);
            for i in 0..n_line {
                y[(i, j)] = sol[i];
            }
        }
        // B = 3 c2^2 C^T Y, then force symmetry
        let scale = 3.0 * c2 * c2;
        let mut b = central.transpose().matmul(&y);
        for v in b.data.iter_mut() {
            *v *= scale;
        }
        for i in 0..n_line {
            for j in 0..=i {
                let s = 0.5 * (b[(i, j)] + b[(j, i)]);
                b[(i, j)] = s;
                b[(j, i)] = s;
            }
        }
        for i in 0..n_line {
            let cell_i = cell_at(i / m);
            for j in 0..n_line {
                let v = b[(i, j)];
                if v != 0.0 {
                    let cell_j = cell_at(j / m);
                    triplets.push((cell_i * m + (i % m), cell_j * m + (j % m), v));
                }
            }
        }
    }
    Ok(triplets)
}
