use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use super::{DgBasis, MaterialField, Mesh2D};
use crate::discretization::material::CoeffFn;
use crate::linalg::{DenseMatrix, LuFactors};
use crate::quadrature::AngularQuadrature;
use crate::{Error, Result};

/// Parameter-independent discrete operators.
///
/// The upwind DG operator for direction `Omega_j` acts cellwise through
/// four reference stencils per axis: for the x axis
///
/// ```text
/// D_j (x part) = |O_x| * ( diag(sign(O_x)) + coupling(sign(O_x)) )
/// ```
///
/// where `diag(+)` is the upwind block for the formal direction `+e_x`
/// (volume advection plus the outflow-edge trace term) and `coupling(+)`
/// couples a cell to its left neighbor.  Boundary edges use the same
/// blocks: outflow traces stay in the diagonal and inflow contributions
/// move to the boundary vectors, so diagonal blocks are identical for
/// every cell.
pub struct DiscreteOperators {
    pub mesh: Mesh2D,
    pub basis: DgBasis,
    pub quad: AngularQuadrature,
    // per-axis upwind stencils, premultiplied by 1/h
    pub(crate) xp_diag: DenseMatrix,
    pub(crate) xp_coup: DenseMatrix,
    pub(crate) xm_diag: DenseMatrix,
    pub(crate) xm_coup: DenseMatrix,
    pub(crate) yp_diag: DenseMatrix,
    pub(crate) yp_coup: DenseMatrix,
    pub(crate) ym_diag: DenseMatrix,
    pub(crate) ym_coup: DenseMatrix,
    // affine cross sections collocated at cell centers
    pub(crate) scat_shapes: Vec<Vec<f64>>,
    pub(crate) scat_coeffs: Vec<CoeffFn>,
    pub(crate) abs_shapes: Vec<Vec<f64>>,
    pub(crate) abs_coeffs: Vec<CoeffFn>,
    /// Discrete isotropic source (length `n_dof`).
    pub source_vec: Vec<f64>,
    pub(crate) inflow_coeffs: Vec<CoeffFn>,
    /// `[piece][direction]`, `None` when the vector vanishes.
    pub(crate) inflow_vecs: Vec<Vec<Option<Vec<f64>>>>,
    /// Largest `n_dirs * n_dof` admitted by the dense oracle builder.
    pub oracle_cap: usize,
    pub(crate) param_box: super::ParamBox,
}

/// One affine term of the fully coupled operator `A_mu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffineTerm {
    /// Block-diagonal advection `diag_j(D_j)`, coefficient 1.
    Advection,
    /// A scattering piece: its total-cross-section block diagonal merged
    /// with the angular coupling `-shape * sum_i w_i psi_i`.
    Scattering(usize),
    /// An absorption piece: pure block-diagonal mass scaling.
    Absorption(usize),
}

pub fn assemble(
    mesh: Mesh2D,
    basis: DgBasis,
    quad: AngularQuadrature,
    mat: &MaterialField,
) -> Result<DiscreteOperators> {
    let n = basis.order + 1;
    let m = basis.dofs_per_cell();
    let hx = mesh.hx();
    let hy = mesh.hy();

    // 1D upwind stencils on the reference interval
    let mut p_diag = DenseMatrix::zeros(n, n);
    let mut p_coup = DenseMatrix::zeros(n, n);
    let mut m_diag = DenseMatrix::zeros(n, n);
    let mut m_coup = DenseMatrix::zeros(n, n);
    for p in 0..n {
        for q in 0..n {
            p_diag[(p, q)] = -basis.adv[p][q] + basis.trace1[p] * basis.trace1[q];
            p_coup[(p, q)] = -basis.trace0[p] * basis.trace1[q];
            m_diag[(p, q)] = basis.adv[p][q] + basis.trace0[p] * basis.trace0[q];
            m_coup[(p, q)] = -basis.trace1[p] * basis.trace0[q];
        }
    }
    let kron_x = |one_d: &DenseMatrix, h: f64| {
        let mut out = DenseMatrix::zeros(m, m);
        for py in 0..n {
            for px in 0..n {
                for qx in 0..n {
                    out[(py * n + px, py * n + qx)] = one_d[(px, qx)] / h;
                }
            }
        }
        out
    };
    let kron_y = |one_d: &DenseMatrix, h: f64| {
        let mut out = DenseMatrix::zeros(m, m);
        for py in 0..n {
            for qy in 0..n {
                for px in 0..n {
                    out[(py * n + px, qy * n + px)] = one_d[(py, qy)] / h;
                }
            }
        }
        out
    };

    let n_cells = mesh.n_cells();
    let collocate = |shape: &super::material::ShapeFn| -> Vec<f64> {
        (0..n_cells)
            .map(|c| {
                let (x, y) = mesh.cell_center(c);
                shape(x, y)
            })
            .collect()
    };
    let scat_shapes: Vec<Vec<f64>> = mat.scattering.iter().map(|p| collocate(&p.shape)).collect();
    let abs_shapes: Vec<Vec<f64>> = mat.absorption.iter().map(|p| collocate(&p.shape)).collect();

    // source vector by tensor Gauss quadrature per cell
    let mut source_vec = vec![0.0; n_cells * m];
    let scale = (hx * hy).sqrt();
    for c in 0..n_cells {
        let (x0, y0) = mesh.cell_origin(c);
        for (qi, &xi) in basis.quad_points.iter().enumerate() {
            for (qj, &zeta) in basis.quad_points.iter().enumerate() {
                let g = (mat.source)(x0 + xi * hx, y0 + zeta * hy);
                if g == 0.0 {
                    continue;
                }
                let w = basis.quad_weights[qi] * basis.quad_weights[qj] * g * scale;
                for local in 0..m {
                    source_vec[c * m + local] += w * basis.eval_local(local, xi, zeta);
                }
            }
        }
    }

    // inflow boundary vectors per affine piece and direction
    let mut inflow_vecs = Vec::with_capacity(mat.inflow.len());
    for piece in &mat.inflow {
        let mut per_dir: Vec<Option<Vec<f64>>> = Vec::with_capacity(quad.len());
        for (dir, &omega) in quad.nodes.iter().enumerate() {
            let _ = dir;
            let mut vec_j = vec![0.0; n_cells * m];
            let mut any = false;
            let [ox, oy, _] = omega;
            // left/right boundaries: inflow where the x component points
            // into the domain; tangent directions contribute nothing
            for iy in 0..mesh.ny {
                if ox > 0.0 {
                    let c = mesh.cell_index(0, iy);
                    any |= edge_inflow_x(&basis, &mesh, piece, omega, c, true, ox, &mut vec_j[c * m..(c + 1) * m]);
                } else if ox < 0.0 {
                    let c = mesh.cell_index(mesh.nx - 1, iy);
                    any |= edge_inflow_x(&basis, &mesh, piece, omega, c, false, -ox, &mut vec_j[c * m..(c + 1) * m]);
                }
            }
            for ix in 0..mesh.nx {
                if oy > 0.0 {
                    let c = mesh.cell_index(ix, 0);
                    any |= edge_inflow_y(&basis, &mesh, piece, omega, c, true, oy, &mut vec_j[c * m..(c + 1) * m]);
                } else if oy < 0.0 {
                    let c = mesh.cell_index(ix, mesh.ny - 1);
                    any |= edge_inflow_y(&basis, &mesh, piece, omega, c, false, -oy, &mut vec_j[c * m..(c + 1) * m]);
                }
            }
            per_dir.push(if any { Some(vec_j) } else { None });
        }
        inflow_vecs.push(per_dir);
    }

    Ok(DiscreteOperators {
        mesh,
        xp_diag: kron_x(&p_diag, hx),
        xp_coup: kron_x(&p_coup, hx),
        xm_diag: kron_x(&m_diag, hx),
        xm_coup: kron_x(&m_coup, hx),
        yp_diag: kron_y(&p_diag, hy),
        yp_coup: kron_y(&p_coup, hy),
        ym_diag: kron_y(&m_diag, hy),
        ym_coup: kron_y(&m_coup, hy),
        scat_shapes,
        scat_coeffs: mat.scattering.iter().map(|p| p.coeff.clone()).collect(),
        abs_shapes,
        abs_coeffs: mat.absorption.iter().map(|p| p.coeff.clone()).collect(),
        source_vec,
        inflow_coeffs: mat.inflow.iter().map(|p| p.coeff.clone()).collect(),
        inflow_vecs,
        oracle_cap: 20_000,
        param_box: mat.param_box.clone(),
        basis,
        quad,
    })
}

/// Accumulate `|O.n| \int_E g eta_k` over a vertical boundary edge of
/// cell `c`.  Returns whether anything nonzero was written.
fn edge_inflow_x(
    basis: &DgBasis,
    mesh: &Mesh2D,
    piece: &super::material::InflowPiece,
    omega: [f64; 3],
    c: usize,
    left: bool,
    abs_on: f64,
    out: &mut [f64],
) -> bool {
    let n = basis.order + 1;
    let (x0, y0) = mesh.cell_origin(c);
    let x_edge = if left { x0 } else { x0 + mesh.hx() };
    let trace = if left { &basis.trace0 } else { &basis.trace1 };
    let geom = (mesh.hy() / mesh.hx()).sqrt();
    let mut any = false;
    for (q, &zeta) in basis.quad_points.iter().enumerate() {
        let g = (piece.profile)(x_edge, y0 + zeta * mesh.hy(), omega);
        if g == 0.0 {
            continue;
        }
        any = true;
        let w = basis.quad_weights[q] * g * abs_on * geom;
        for py in 0..n {
            let ly = super::basis::eval_ref(py, zeta);
            for px in 0..n {
                out[py * n + px] += w * trace[px] * ly;
            }
        }
    }
    any
}

fn edge_inflow_y(
    basis: &DgBasis,
    mesh: &Mesh2D,
    piece: &super::material::InflowPiece,
    omega: [f64; 3],
    c: usize,
    bottom: bool,
    abs_on: f64,
    out: &mut [f64],
) -> bool {
    let n = basis.order + 1;
    let (x0, y0) = mesh.cell_origin(c);
    let y_edge = if bottom { y0 } else { y0 + mesh.hy() };
    let trace = if bottom { &basis.trace0 } else { &basis.trace1 };
    let geom = (mesh.hx() / mesh.hy()).sqrt();
    let mut any = false;
    for (q, &xi) in basis.quad_points.iter().enumerate() {
        let g = (piece.profile)(x0 + xi * mesh.hx(), y_edge, omega);
        if g == 0.0 {
            continue;
        }
        any = true;
        let w = basis.quad_weights[q] * g * abs_on * geom;
        for px in 0..n {
            let lx = super::basis::eval_ref(px, xi);
            for py in 0..n {
                out[py * n + px] += w * trace[py] * lx;
            }
        }
    }
    any
}

impl DiscreteOperators {
    pub fn n_dof(&self) -> usize {
        self.mesh.n_cells() * self.basis.dofs_per_cell()
    }

    pub fn n_dirs(&self) -> usize {
        self.quad.len()
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.basis.dofs_per_cell()
    }

    /// Enumeration of the affine terms of `A_mu`, advection first.
    pub fn affine_terms(&self) -> Vec<AffineTerm> {
        let mut terms = vec![AffineTerm::Advection];
        terms.extend((0..self.scat_shapes.len()).map(AffineTerm::Scattering));
        terms.extend((0..self.abs_shapes.len()).map(AffineTerm::Absorption));
        terms
    }

    pub fn affine_coeff(&self, term: AffineTerm, mu: &[f64]) -> f64 {
        match term {
            AffineTerm::Advection => 1.0,
            AffineTerm::Scattering(k) => (self.scat_coeffs[k])(mu),
            AffineTerm::Absorption(k) => (self.abs_coeffs[k])(mu),
        }
    }

    /// Apply one affine term to a full angular vector (`n_dirs * n_dof`).
    pub fn apply_affine_term(&self, term: AffineTerm, psi: &[f64], out: &mut [f64]) {
        let nd = self.n_dof();
        let m = self.dofs_per_cell();
        assert_eq!(psi.len(), self.n_dirs() * nd);
        assert_eq!(out.len(), psi.len());
        match term {
            AffineTerm::Advection => {
                for j in 0..self.n_dirs() {
                    let (psi_j, out_j) = (&psi[j * nd..(j + 1) * nd], &mut out[j * nd..(j + 1) * nd]);
                    self.apply_advection(self.quad.nodes[j], psi_j, out_j, false);
                }
            }
            AffineTerm::Scattering(k) => {
                let shape = &self.scat_shapes[k];
                // angular integral, accumulated in direction order
                let mut phi = vec![0.0; nd];
                for j in 0..self.n_dirs() {
                    let w = self.quad.weights[j];
                    for (p, v) in phi.iter_mut().zip(&psi[j * nd..(j + 1) * nd]) {
                        *p += w * v;
                    }
                }
                for j in 0..self.n_dirs() {
                    for c in 0..self.mesh.n_cells() {
                        let s = shape[c];
                        for l in 0..m {
                            let idx = c * m + l;
                            out[j * nd + idx] = s * (psi[j * nd + idx] - phi[idx]);
                        }
                    }
                }
            }
            AffineTerm::Absorption(k) => {
                let shape = &self.abs_shapes[k];
                for j in 0..self.n_dirs() {
                    for c in 0..self.mesh.n_cells() {
                        let s = shape[c];
                        for l in 0..m {
                            let idx = c * m + l;
                            out[j * nd + idx] = s * psi[j * nd + idx];
                        }
                    }
                }
            }
        }
    }

    /// Transposed counterpart of
    /// [`apply_affine_term`](Self::apply_affine_term).
    pub fn apply_affine_term_transpose(&self, term: AffineTerm, psi: &[f64], out: &mut [f64]) {
        let nd = self.n_dof();
        let m = self.dofs_per_cell();
        assert_eq!(psi.len(), self.n_dirs() * nd);
        assert_eq!(out.len(), psi.len());
        match term {
            AffineTerm::Advection => {
                for j in 0..self.n_dirs() {
                    let (psi_j, out_j) = (&psi[j * nd..(j + 1) * nd], &mut out[j * nd..(j + 1) * nd]);
                    self.apply_advection(self.quad.nodes[j], psi_j, out_j, true);
                }
            }
            AffineTerm::Scattering(k) => {
                let shape = &self.scat_shapes[k];
                // transpose of the coupling: out_j = shape psi_j - w_j shape sum_i psi_i
                let mut total = vec![0.0; nd];
                for j in 0..self.n_dirs() {
                    for (p, v) in total.iter_mut().zip(&psi[j * nd..(j + 1) * nd]) {
                        *p += v;
                    }
                }
                for j in 0..self.n_dirs() {
                    let w = self.quad.weights[j];
                    for c in 0..self.mesh.n_cells() {
                        let s = shape[c];
                        for l in 0..m {
                            let idx = c * m + l;
                            out[j * nd + idx] = s * (psi[j * nd + idx] - w * total[idx]);
                        }
                    }
                }
            }
            AffineTerm::Absorption(_) => self.apply_affine_term(term, psi, out),
        }
    }

    /// `out (+)= D_j psi` for a single direction block (no cross section).
    pub(crate) fn apply_advection(&self, omega: [f64; 3], psi: &[f64], out: &mut [f64], transpose: bool) {
        let m = self.dofs_per_cell();
        let (ox, oy) = (omega[0], omega[1]);
        let (dx, cx) = if ox >= 0.0 {
            (&self.xp_diag, &self.xp_coup)
        } else {
            (&self.xm_diag, &self.xm_coup)
        };
        let (dy, cy) = if oy >= 0.0 {
            (&self.yp_diag, &self.yp_coup)
        } else {
            (&self.ym_diag, &self.ym_coup)
        };
        let (ax, ay) = (ox.abs(), oy.abs());
        let nx = self.mesh.nx as isize;
        let ny = self.mesh.ny as isize;
        // upwind neighbor offsets; the transpose couples downwind instead
        let step_x: isize = if ox >= 0.0 { -1 } else { 1 };
        let step_y: isize = if oy >= 0.0 { -1 } else { 1 };
        let (step_x, step_y) = if transpose { (-step_x, -step_y) } else { (step_x, step_y) };
        for c in 0..self.mesh.n_cells() {
            let (ix, iy) = self.mesh.cell_coords(c);
            let out_c = &mut out[c * m..(c + 1) * m];
            out_c.fill(0.0);
            let own = &psi[c * m..(c + 1) * m];
            let mut acc = |mat: &DenseMatrix, scale: f64, v: &[f64], out_c: &mut [f64]| {
                if scale == 0.0 {
                    return;
                }
                if transpose {
                    for (i, o) in out_c.iter_mut().enumerate() {
                        let mut s = 0.0;
                        for (r, vr) in v.iter().enumerate() {
                            s += mat[(r, i)] * vr;
                        }
                        *o += scale * s;
                    }
                } else {
                    for (i, o) in out_c.iter_mut().enumerate() {
                        let mut s = 0.0;
                        let row = mat.row(i);
                        for (rv, vr) in row.iter().zip(v) {
                            s += rv * vr;
                        }
                        *o += scale * s;
                    }
                }
            };
            acc(dx, ax, own, out_c);
            acc(dy, ay, own, out_c);
            if ax > 0.0 {
                let jx = ix as isize + step_x;
                if (0..nx).contains(&jx) {
                    let nb = self.mesh.cell_index(jx as usize, iy);
                    acc(cx, ax, &psi[nb * m..(nb + 1) * m], out_c);
                }
            }
            if ay > 0.0 {
                let jy = iy as isize + step_y;
                if (0..ny).contains(&jy) {
                    let nb = self.mesh.cell_index(ix, jy as usize);
                    acc(cy, ay, &psi[nb * m..(nb + 1) * m], out_c);
                }
            }
        }
    }

    /// Collocated per-cell cross sections `(sigma_s, sigma_a)` at a
    /// parameter point, without building any factorizations.  Points
    /// outside the declared box are allowed (test sets may extrapolate)
    /// and only draw a warning.
    pub fn cross_sections(&self, mu: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if mu.len() != self.param_box.dim() {
            return Err(Error::Domain(format!(
                "parameter point has dimension {}, expected {}",
                mu.len(),
                self.param_box.dim()
            )));
        }
        if !self.param_box.contains(mu) {
            log::warn!(
                "parameter {mu:?} lies outside the declared box [{:?}, {:?}]; extrapolating",
                self.param_box.lo,
                self.param_box.hi
            );
        }
        let n_cells = self.mesh.n_cells();
        let mut sigma_s = vec![0.0; n_cells];
        for (shape, coeff) in self.scat_shapes.iter().zip(&self.scat_coeffs) {
            let a = coeff(mu);
            for (s, v) in sigma_s.iter_mut().zip(shape) {
                *s += a * v;
            }
        }
        let mut sigma_a = vec![0.0; n_cells];
        for (shape, coeff) in self.abs_shapes.iter().zip(&self.abs_coeffs) {
            let a = coeff(mu);
            for (s, v) in sigma_a.iter_mut().zip(shape) {
                *s += a * v;
            }
        }
        for (c, (&s, &a)) in sigma_s.iter().zip(&sigma_a).enumerate() {
            if s < 0.0 || a < 0.0 {
                return Err(Error::Domain(format!(
                    "negative cross section in cell {c}: sigma_s = {s}, sigma_a = {a}"
                )));
            }
        }
        Ok((sigma_s, sigma_a))
    }

    /// Bind the operators at a parameter point.
    pub fn evaluate_affine(&self, mu: &[f64]) -> Result<BoundOperators<'_>> {
        let (sigma_s, sigma_a) = self.cross_sections(mu)?;
        let sigma_t: Vec<f64> = sigma_s.iter().zip(&sigma_a).map(|(s, a)| s + a).collect();
        let n_cells = self.mesh.n_cells();

        // material classes by exact sigma_t value
        let mut class_map: BTreeMap<u64, u32> = BTreeMap::new();
        let mut class_values: Vec<f64> = Vec::new();
        let mut class_of_cell = Vec::with_capacity(n_cells);
        for &st in &sigma_t {
            let key = st.to_bits();
            let id = *class_map.entry(key).or_insert_with(|| {
                class_values.push(st);
                (class_values.len() - 1) as u32
            });
            class_of_cell.push(id);
        }

        let m = self.dofs_per_cell();
        let mut dir_data = Vec::with_capacity(self.n_dirs());
        for (j, &omega) in self.quad.nodes.iter().enumerate() {
            let (ox, oy) = (omega[0], omega[1]);
            let (dx, cx) = if ox >= 0.0 {
                (&self.xp_diag, &self.xp_coup)
            } else {
                (&self.xm_diag, &self.xm_coup)
            };
            let (dy, cy) = if oy >= 0.0 {
                (&self.yp_diag, &self.yp_coup)
            } else {
                (&self.ym_diag, &self.ym_coup)
            };
            let (ax, ay) = (ox.abs(), oy.abs());
            let mut diag_lu = Vec::with_capacity(class_values.len());
            for (cls, &st) in class_values.iter().enumerate() {
                let mut block = DenseMatrix::zeros(m, m);
                for r in 0..m {
                    for c in 0..m {
                        block[(r, c)] = ax * dx[(r, c)] + ay * dy[(r, c)];
                    }
                    block[(r, r)] += st;
                }
                let lu = block.lu().map_err(|_| {
                    Error::Numerics(format!(
                        "singular transport block for direction {j} (sigma_t = {st}, class {cls})"
                    ))
                })?;
                diag_lu.push(lu);
            }
            let mut coup_x = DenseMatrix::zeros(m, m);
            let mut coup_y = DenseMatrix::zeros(m, m);
            for r in 0..m {
                for c in 0..m {
                    coup_x[(r, c)] = ax * cx[(r, c)];
                    coup_y[(r, c)] = ay * cy[(r, c)];
                }
            }
            dir_data.push(DirectionData {
                omega,
                diag_lu,
                coup_x,
                coup_y,
                has_x: ax > 0.0,
                has_y: ay > 0.0,
                step_x: if ox >= 0.0 { -1 } else { 1 },
                step_y: if oy >= 0.0 { -1 } else { 1 },
            });
        }

        // bound boundary vectors
        let mut bc_vecs: Vec<Option<Vec<f64>>> = vec![None; self.n_dirs()];
        for (piece, per_dir) in self.inflow_coeffs.iter().zip(&self.inflow_vecs) {
            let a = piece(mu);
            if a == 0.0 {
                continue;
            }
            for (j, v) in per_dir.iter().enumerate() {
                if let Some(v) = v {
                    let slot = bc_vecs[j].get_or_insert_with(|| vec![0.0; self.n_dof()]);
                    for (o, x) in slot.iter_mut().zip(v) {
                        *o += a * x;
                    }
                }
            }
        }

        Ok(BoundOperators {
            ops: self,
            mu: mu.to_vec(),
            sigma_s_cells: sigma_s,
            sigma_a_cells: sigma_a,
            sigma_t_cells: sigma_t,
            class_of_cell,
            dir_data,
            bc_vecs,
            sweep_counter: AtomicU64::new(0),
        })
    }
}

pub(crate) struct DirectionData {
    pub omega: [f64; 3],
    /// Per material class LU of the cell-diagonal block of `D_j + Sigma_t`.
    pub diag_lu: Vec<LuFactors>,
    pub coup_x: DenseMatrix,
    pub coup_y: DenseMatrix,
    pub has_x: bool,
    pub has_y: bool,
    /// Upwind neighbor offsets along each axis.
    pub step_x: isize,
    pub step_y: isize,
}

/// Operators bound at a parameter point: cell cross sections, cached
/// per-direction block factorizations and boundary data, plus the sweep
/// counter that feeds solver reports.
pub struct BoundOperators<'a> {
    pub ops: &'a DiscreteOperators,
    pub mu: Vec<f64>,
    pub sigma_s_cells: Vec<f64>,
    pub sigma_a_cells: Vec<f64>,
    pub sigma_t_cells: Vec<f64>,
    pub(crate) class_of_cell: Vec<u32>,
    pub(crate) dir_data: Vec<DirectionData>,
    pub(crate) bc_vecs: Vec<Option<Vec<f64>>>,
    pub(crate) sweep_counter: AtomicU64,
}

impl<'a> BoundOperators<'a> {
    pub fn n_dof(&self) -> usize {
        self.ops.n_dof()
    }

    pub fn n_dirs(&self) -> usize {
        self.ops.n_dirs()
    }

    /// Full right-hand side for direction `j`: source plus bound inflow.
    pub fn g_tilde(&self, j: usize) -> Vec<f64> {
        let mut g = self.ops.source_vec.clone();
        if let Some(bc) = &self.bc_vecs[j] {
            for (o, x) in g.iter_mut().zip(bc) {
                *o += x;
            }
        }
        g
    }

    /// Diagonal scattering operator: `out = Sigma_s v` (dof-wise).
    pub fn apply_sigma_s(&self, v: &[f64]) -> Vec<f64> {
        let m = self.ops.dofs_per_cell();
        let mut out = vec![0.0; v.len()];
        for (c, &s) in self.sigma_s_cells.iter().enumerate() {
            for l in 0..m {
                out[c * m + l] = s * v[c * m + l];
            }
        }
        out
    }

    /// `(D_j + Sigma_t) psi_j` through the stencil (no solve).
    pub fn apply_direction(&self, j: usize, psi_j: &[f64], out: &mut [f64]) {
        let m = self.ops.dofs_per_cell();
        self.ops.apply_advection(self.dir_data[j].omega, psi_j, out, false);
        for (c, &st) in self.sigma_t_cells.iter().enumerate() {
            for l in 0..m {
                out[c * m + l] += st * psi_j[c * m + l];
            }
        }
    }

    /// Number of completed transport sweeps (one sweep = one pass over
    /// all directions).  Partial passes count fractionally.
    pub fn transport_sweeps(&self) -> f64 {
        self.sweep_counter.load(Ordering::Relaxed) as f64 / self.n_dirs() as f64
    }

    pub(crate) fn count_direction_sweeps(&self, n: u64) {
        self.sweep_counter.fetch_add(n, Ordering::Relaxed);
    }

    /// Assemble the dense fully coupled system `(A, b)`; refuses above
    /// the configured oracle cap.
    pub fn build_full_matrix(&self) -> Result<(DenseMatrix, Vec<f64>)> {
        let nd = self.n_dof();
        let ndirs = self.n_dirs();
        let n = nd * ndirs;
        if n > self.ops.oracle_cap {
            return Err(Error::Domain(format!(
                "dense oracle refused: system size {n} exceeds cap {}",
                self.ops.oracle_cap
            )));
        }
        let m = self.ops.dofs_per_cell();
        let mut a = DenseMatrix::zeros(n, n);
        // advection + total cross section on the diagonal blocks
        let mut unit = vec![0.0; nd];
        let mut col = vec![0.0; nd];
        for j in 0..ndirs {
            for src in 0..nd {
                unit[src] = 1.0;
                self.apply_direction(j, &unit, &mut col);
                unit[src] = 0.0;
                for row in 0..nd {
                    if col[row] != 0.0 {
                        a[(j * nd + row, j * nd + src)] = col[row];
                    }
                }
            }
        }
        // scattering coupling: block (j, i) -= w_i Sigma_s
        for j in 0..ndirs {
            for i in 0..ndirs {
                let w = self.ops.quad.weights[i];
                for (c, &s) in self.sigma_s_cells.iter().enumerate() {
                    if s == 0.0 {
                        continue;
                    }
                    for l in 0..m {
                        let dof = c * m + l;
                        a[(j * nd + dof, i * nd + dof)] -= w * s;
                    }
                }
            }
        }
        let mut b = vec![0.0; n];
        for j in 0..ndirs {
            b[j * nd..(j + 1) * nd].copy_from_slice(&self.g_tilde(j));
        }
        Ok((a, b))
    }

    /// `A_mu psi` as the sum of the affine terms, for consistency tests
    /// and the reduced projections.
    pub fn apply_full(&self, psi: &[f64], out: &mut [f64]) {
        let terms = self.ops.affine_terms();
        let mut tmp = vec![0.0; psi.len()];
        out.fill(0.0);
        for term in terms {
            let a = self.ops.affine_coeff(term, &self.mu);
            if a == 0.0 {
                continue;
            }
            self.ops.apply_affine_term(term, psi, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += a * t;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{DgBasis, MaterialField, Mesh2D};
    use crate::quadrature::AngularQuadrature;

    fn tiny_ops(sigma_s: f64, sigma_a: f64) -> DiscreteOperators {
        let mesh = Mesh2D::new([0.0, 1.0, 0.0, 1.0], 2, 2).unwrap();
        let basis = DgBasis::new(1).unwrap();
        let quad = AngularQuadrature::chebyshev_legendre(4, 2).unwrap();
        let mat = MaterialField::homogeneous(sigma_s, sigma_a, |_, _| 1.0);
        assemble(mesh, basis, quad, &mat).unwrap()
    }

    #[test]
    fn constant_sigma_t_binds_to_constant_diagonal() {
        let ops = tiny_ops(1.5, 0.5);
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        assert!(bound.sigma_t_cells.iter().all(|&s| s == 2.0));
        assert_eq!(bound.class_of_cell.iter().collect::<std::collections::BTreeSet<_>>().len(), 1);
    }

    #[test]
    fn zero_inflow_means_no_boundary_vectors() {
        let ops = tiny_ops(1.0, 0.0);
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        assert!(bound.bc_vecs.iter().all(|v| v.is_none()));
        let g = bound.g_tilde(0);
        assert_eq!(g, ops.source_vec);
    }

    #[test]
    fn upwind_blocks_are_positive_semidefinite() {
        // u^T D_j u >= 0 because the skew part cancels and the jump part
        // is a sum of squares
        let ops = tiny_ops(0.0, 1.0);
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        let nd = ops.n_dof();
        let mut state = 123u64;
        let mut rng = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        for j in 0..ops.n_dirs() {
            for _ in 0..5 {
                let u: Vec<f64> = (0..nd).map(|_| rng()).collect();
                let mut du = vec![0.0; nd];
                ops.apply_advection(bound.dir_data[j].omega, &u, &mut du, false);
                let quad_form: f64 = u.iter().zip(&du).map(|(a, b)| a * b).sum();
                let norm2: f64 = u.iter().map(|x| x * x).sum();
                assert!(
                    quad_form >= -1e-12 * norm2,
                    "direction {j}: u^T D u = {quad_form}"
                );
            }
        }
    }

    #[test]
    fn advection_transpose_is_consistent() {
        let ops = tiny_ops(1.0, 0.0);
        let nd = ops.n_dof();
        let mut state = 7u64;
        let mut rng = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        let omega = ops.quad.nodes[3];
        let u: Vec<f64> = (0..nd).map(|_| rng()).collect();
        let v: Vec<f64> = (0..nd).map(|_| rng()).collect();
        let mut du = vec![0.0; nd];
        let mut dtv = vec![0.0; nd];
        ops.apply_advection(omega, &u, &mut du, false);
        ops.apply_advection(omega, &v, &mut dtv, true);
        let a: f64 = v.iter().zip(&du).map(|(x, y)| x * y).sum();
        let b: f64 = u.iter().zip(&dtv).map(|(x, y)| x * y).sum();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn dense_matrix_is_block_diagonal_without_scattering() {
        let ops = tiny_ops(0.0, 2.0);
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        let (a, _) = bound.build_full_matrix().unwrap();
        let nd = ops.n_dof();
        for j in 0..ops.n_dirs() {
            for i in 0..ops.n_dirs() {
                if i == j {
                    continue;
                }
                for r in 0..nd {
                    for c in 0..nd {
                        assert_eq!(a[(j * nd + r, i * nd + c)], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn single_cell_system_has_expected_size() {
        let mesh = Mesh2D::new([0.0, 1.0, 0.0, 1.0], 1, 1).unwrap();
        let basis = DgBasis::new(1).unwrap();
        let quad = AngularQuadrature::chebyshev_legendre(2, 1).unwrap();
        let mat = MaterialField::homogeneous(0.5, 0.5, |_, _| 1.0);
        let ops = assemble(mesh, basis, quad, &mat).unwrap();
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        let (a, b) = bound.build_full_matrix().unwrap();
        assert_eq!(a.rows, 8);
        assert_eq!(b.len(), 8);
    }

    #[test]
    fn affine_reconstruction_matches_direct_binding() {
        // lattice-like two-piece material; check apply_full against the
        // dense matrix assembled at the same parameter
        let mesh = Mesh2D::new([0.0, 1.0, 0.0, 1.0], 2, 2).unwrap();
        let basis = DgBasis::new(1).unwrap();
        let quad = AngularQuadrature::chebyshev_legendre(2, 1).unwrap();
        let mat = MaterialField {
            scattering: vec![CrossSectionPiece::new(|mu| mu[1], |x, _| if x < 0.5 { 1.0 } else { 0.0 })],
            absorption: vec![CrossSectionPiece::new(|mu| mu[0], |x, _| if x >= 0.5 { 1.0 } else { 0.0 })],
            source: std::sync::Arc::new(|_, _| 1.0),
            inflow: Vec::new(),
            param_box: super::super::ParamBox::new(vec![95.0, 0.5], vec![105.0, 1.5]),
        };
        let ops = assemble(mesh, basis, quad, &mat).unwrap();
        let mu = [100.0, 1.0];
        let bound = ops.evaluate_affine(&mu).unwrap();
        let (a, _) = bound.build_full_matrix().unwrap();
        let n = a.rows;
        let mut state = 99u64;
        let mut rng = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        let psi: Vec<f64> = (0..n).map(|_| rng()).collect();
        let dense = a.matvec(&psi);
        let mut affine = vec![0.0; n];
        bound.apply_full(&psi, &mut affine);
        for (d, f) in dense.iter().zip(&affine) {
            assert!((d - f).abs() <= 1e-12, "affine reconstruction mismatch: {d} vs {f}");
        }
    }

    #[test]
    fn oracle_cap_is_enforced() {
        let mut ops = tiny_ops(1.0, 0.0);
        ops.oracle_cap = 10;
        let bound = ops.evaluate_affine(&[0.0]).unwrap();
        assert!(bound.build_full_matrix().is_err());
    }

    use crate::discretization::material::CrossSectionPiece;
}
