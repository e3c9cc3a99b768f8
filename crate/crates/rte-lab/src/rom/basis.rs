//! The reduced basis, its affine operator projections, and the
//! angular-integration matrices used by the reduced correction.

use crate::discretization::{BoundOperators, DiscreteOperators};
use crate::linalg::{self, DenseMatrix, LuFactors};
use crate::Result;

/// Truncation tolerance of the orthogonalization step.
pub const DEFAULT_EPS_QR: f64 = 1e-13;

/// Orthogonalize `candidate` against `basis` (modified Gram-Schmidt
/// order) and append it normalized when the residual exceeds `eps_qr`.
/// Returns whether the basis grew.
pub fn mgs_truncated(basis: &mut Vec<Vec<f64>>, mut candidate: Vec<f64>, eps_qr: f64) -> bool {
    for col in basis.iter() {
        let r = linalg::dot(col, &candidate);
        linalg::axpy(-r, col, &mut candidate);
    }
    let norm = linalg::norm2(&candidate);
    if norm > eps_qr {
        linalg::scale(&mut candidate, 1.0 / norm);
        basis.push(candidate);
        true
    } else {
        false
    }
}

/// Orthonormal angular-flux-sized basis with precomputed reduced
/// operators.
pub struct ReducedBasis {
    pub n_dirs: usize,
    pub n_dof: usize,
    /// Orthonormal columns, each of length `n_dirs * n_dof`.
    pub columns: Vec<Vec<f64>>,
    pub window: usize,
    pub eps_rom: f64,
    /// Reduced affine operators, one `r x r` matrix per affine term of
    /// the full operator (same ordering as `DiscreteOperators::affine_terms`).
    pub projected: Vec<DenseMatrix>,
    /// Columns of `sum_j U_{r,j}` (length `n_dof` each).
    pub sum_blocks: Vec<Vec<f64>>,
    /// Columns of `sum_j w_j U_{r,j}`.
    pub weighted_sum_blocks: Vec<Vec<f64>>,
    /// Parameters sampled while training, in order.
    pub samples: Vec<Vec<f64>>,
    /// Hash of the discretization the basis was trained on.
    pub disc_hash: u64,
}

impl ReducedBasis {
    pub fn new(ops: &DiscreteOperators, window: usize, eps_rom: f64) -> Self {
        let n_terms = ops.affine_terms().len();
        ReducedBasis {
            n_dirs: ops.n_dirs(),
            n_dof: ops.n_dof(),
            columns: Vec::new(),
            window,
            eps_rom,
            projected: vec![DenseMatrix::zeros(0, 0); n_terms],
            sum_blocks: Vec::new(),
            weighted_sum_blocks: Vec::new(),
            samples: Vec::new(),
            disc_hash: super::discretization_hash(ops),
        }
    }

    pub fn r(&self) -> usize {
        self.columns.len()
    }

    /// Direction block `U_{r,j}` of one column.
    pub fn block(&self, col: usize, j: usize) -> &[f64] {
        &self.columns[col][j * self.n_dof..(j + 1) * self.n_dof]
    }

    /// `max |U^T U - I|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (i, a) in self.columns.iter().enumerate() {
            for (j, b) in self.columns.iter().enumerate() {
                let d = linalg::dot(a, b) - if i == j { 1.0 } else { 0.0 };
                worst = worst.max(d.abs());
            }
        }
        worst
    }

    /// Feed snapshot columns through the truncated orthogonalization and
    /// extend the reduced operators for whatever survived.  Returns the
    /// number of accepted columns.
    pub fn ingest(
        &mut self,
        ops: &DiscreteOperators,
        snapshots: &[Vec<f64>],
        prenormalize: bool,
        eps_qr: f64,
    ) -> usize {
        let r_before = self.r();
        for snap in snapshots {
            let mut candidate = snap.clone();
            if prenormalize {
                let n = linalg::norm2(&candidate);
                if n > 0.0 {
                    linalg::scale(&mut candidate, 1.0 / n);
                }
            }
            mgs_truncated(&mut self.columns, candidate, eps_qr);
        }
        let added = self.r() - r_before;
        if added > 0 {
            self.extend_projections(ops, r_before);
            self.extend_integration(ops, r_before);
        }
        added
    }

    /// Incrementally extend `U^T A_s U` for columns `r0..` of the basis.
    fn extend_projections(&mut self, ops: &DiscreteOperators, r0: usize) {
        let r1 = self.r();
        let terms = ops.affine_terms();
        let mut applied = vec![0.0; self.n_dirs * self.n_dof];
        for (t, term) in terms.iter().enumerate() {
            let mut grown = DenseMatrix::zeros(r1, r1);
            for i in 0..r0 {
                for j in 0..r0 {
                    grown[(i, j)] = self.projected[t][(i, j)];
                }
            }
            for new in r0..r1 {
                ops.apply_affine_term(*term, &self.columns[new], &mut applied);
                for (i, col) in self.columns.iter().enumerate() {
                    grown[(i, new)] = linalg::dot(col, &applied);
                }
                // rows of the new column against old columns; entries
                // against the other new columns come from their own
                // forward passes
                ops.apply_affine_term_transpose(*term, &self.columns[new], &mut applied);
                for (i, col) in self.columns.iter().enumerate().take(r0) {
                    grown[(new, i)] = linalg::dot(&applied, col);
                }
            }
            self.projected[t] = grown;
        }
    }

    fn extend_integration(&mut self, ops: &DiscreteOperators, r0: usize) {
        for col in r0..self.r() {
            let mut plain = vec![0.0; self.n_dof];
            let mut weighted = vec![0.0; self.n_dof];
            for j in 0..self.n_dirs {
                let w = ops.quad.weights[j];
                let block = &self.columns[col][j * self.n_dof..(j + 1) * self.n_dof];
                for (i, v) in block.iter().enumerate() {
                    plain[i] += v;
                    weighted[i] += w * v;
                }
            }
            self.sum_blocks.push(plain);
            self.weighted_sum_blocks.push(weighted);
        }
    }

    /// Reduced system bound at a parameter: `sum_s a_s(mu) A_{s,r}`,
    /// factorized.  A singular reduced matrix yields `lu = None` and a
    /// warning; callers fall back to DSA.
    pub fn bind(&self, ops: &DiscreteOperators, mu: &[f64]) -> Result<BoundReducedSystem> {
        let r = self.r();
        let mut matrix = DenseMatrix::zeros(r, r);
        for (t, term) in ops.affine_terms().iter().enumerate() {
            let a = ops.affine_coeff(*term, mu);
            if a == 0.0 {
                continue;
            }
            for i in 0..r {
                for j in 0..r {
                    matrix[(i, j)] += a * self.projected[t][(i, j)];
                }
            }
        }
        let lu = if r == 0 {
            None
        } else {
            match LuFactors::new(matrix.clone()) {
                Ok(lu) => Some(lu),
                Err(_) => {
                    log::warn!("reduced operator is singular at mu = {mu:?}; falling back to DSA");
                    None
                }
            }
        };
        Ok(BoundReducedSystem { matrix, lu })
    }

    /// Direct projection `U^T A_mu U` through full operator applies; the
    /// oracle path for validating the affine route.
    pub fn project_direct(&self, bound: &BoundOperators) -> DenseMatrix {
        let r = self.r();
        let mut out = DenseMatrix::zeros(r, r);
        let mut applied = vec![0.0; self.n_dirs * self.n_dof];
        for j in 0..r {
            bound.apply_full(&self.columns[j], &mut applied);
            for i in 0..r {
                out[(i, j)] = linalg::dot(&self.columns[i], &applied);
            }
        }
        out
    }

    /// `(sum_j U_{r,j})^T v` for a scalar-flux-sized `v`.
    pub fn project_scalar(&self, v: &[f64]) -> Vec<f64> {
        self.sum_blocks.iter().map(|col| linalg::dot(col, v)).collect()
    }

    /// `(sum_j w_j U_{r,j}) c` back to scalar-flux size.
    pub fn expand_weighted(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dof];
        for (coef, col) in c.iter().zip(&self.weighted_sum_blocks) {
            linalg::axpy(*coef, col, &mut out);
        }
        out
    }

    /// `U_{r,j} c`: reduced coefficients to one direction block.
    pub fn expand_block(&self, j: usize, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dof];
        for (coef, col) in c.iter().zip(&self.columns) {
            linalg::axpy(*coef, &col[j * self.n_dof..(j + 1) * self.n_dof], &mut out);
        }
        out
    }
}

/// Factorized `r x r` reduced operator at one parameter.
pub struct BoundReducedSystem {
    pub matrix: DenseMatrix,
    pub lu: Option<LuFactors>,
}

impl BoundReducedSystem {
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        self.lu.as_ref().map(|lu| lu.solve(rhs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_span_member_is_rejected() {
        let e1 = vec![1.0, 0.0, 0.0];
        let mut basis = vec![e1.clone()];
        assert!(!mgs_truncated(&mut basis, e1, 1e-13));
        assert_eq!(basis.len(), 1);
    }

    #[test]
    fn independent_candidate_is_orthonormalized() {
        let mut basis = vec![vec![1.0, 0.0, 0.0]];
        let grew = mgs_truncated(&mut basis, vec![1.0, 1.0, 0.0], 1e-13);
        assert!(grew);
        assert!((basis[1][0]).abs() <= 1e-15);
        assert!((basis[1][1] - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn random_stream_stays_orthonormal() {
        let mut state = 1234u64;
        let mut rng = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        let dim = 24;
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for _ in 0..1000 {
            let cand: Vec<f64> = (0..dim).map(|_| rng()).collect();
            mgs_truncated(&mut basis, cand, 1e-12);
        }
        assert!(basis.len() <= dim);
        let mut worst = 0.0_f64;
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let d = linalg::dot(a, b) - if i == j { 1.0 } else { 0.0 };
                worst = worst.max(d.abs());
            }
        }
        assert!(worst <= 1e-12, "orthogonality defect {worst:.3e}");
    }
}
