//! Small dense/sparse linear algebra kernels shared across the crate.
//!
//! Everything here is deliberately plain: row-major dense matrices backed
//! by `Vec<f64>`, LU with partial pivoting for the per-cell blocks and the
//! reduced systems, Givens-based least squares for Hessenberg problems,
//! and a CSR matrix with a preconditioned CG solver for the diffusion
//! operator.

use crate::{Error, Result};

// ---------------------------------------------------------------------
// vector helpers
// ---------------------------------------------------------------------

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[inline]
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(v: &mut [f64], alpha: f64) {
    for x in v.iter_mut() {
        *x *= alpha;
    }
}

/// `out = a - b`
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

// ---------------------------------------------------------------------
// dense matrices
// ---------------------------------------------------------------------

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c);
            data.extend_from_slice(row);
        }
        DenseMatrix { rows: r, cols: c, data }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `y^T A` as a vector of length `cols`.
    pub fn matvec_transposed(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            axpy(y[i], self.row(i), &mut out);
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Result<LuFactors> {
        LuFactors::new(self.clone())
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factors of a square matrix, partial pivoting.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: DenseMatrix,
    pivots: Vec<usize>,
}

impl LuFactors {
    pub fn new(mut a: DenseMatrix) -> Result<Self> {
        assert_eq!(a.rows, a.cols);
        let n = a.rows;
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let mut p = k;
            let mut max = a[(k, k)].abs();
            for i in (k + 1)..n {
                let v = a[(i, k)].abs();
                if v > max {
                    max = v;
                    p = i;
                }
            }
            if max == 0.0 {
                return Err(Error::Numerics(format!(
                    "singular matrix in LU factorization at column {k}"
                )));
            }
            pivots[k] = p;
            if p != k {
                for j in 0..n {
                    let tmp = a[(k, j)];
                    a[(k, j)] = a[(p, j)];
                    a[(p, j)] = tmp;
                }
            }
            let diag = a[(k, k)];
            for i in (k + 1)..n {
                let factor = a[(i, k)] / diag;
                a[(i, k)] = factor;
                for j in (k + 1)..n {
                    let akj = a[(k, j)];
                    a[(i, j)] -= factor * akj;
                }
            }
        }
        Ok(LuFactors { lu: a, pivots })
    }

    pub fn n(&self) -> usize {
        self.lu.rows
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n();
        assert_eq!(x.len(), n);
        for k in 0..n {
            x.swap(k, self.pivots[k]);
        }
        // forward: L y = Pb (unit diagonal)
        for i in 1..n {
            let mut s = x[i];
            let row = self.lu.row(i);
            for j in 0..i {
                s -= row[j] * x[j];
            }
            x[i] = s;
        }
        // backward: U x = y
        for i in (0..n).rev() {
            let mut s = x[i];
            let row = self.lu.row(i);
            for j in (i + 1)..n {
                s -= row[j] * x[j];
            }
            x[i] = s / row[i];
        }
    }
}

// ---------------------------------------------------------------------
// Hessenberg least squares via Givens rotations
// ---------------------------------------------------------------------

/// Plane rotation zeroing the second component of `(a, b)`.
#[derive(Debug, Clone, Copy)]
pub struct Givens {
    pub c: f64,
    pub s: f64,
}

impl Givens {
    pub fn compute(a: f64, b: f64) -> Self {
        if b == 0.0 {
            Givens { c: 1.0, s: 0.0 }
        } else if a.abs() > b.abs() {
            let t = b / a;
            let c = 1.0 / (1.0 + t * t).sqrt();
            Givens { c, s: c * t }
        } else {
            let t = a / b;
            let s = 1.0 / (1.0 + t * t).sqrt();
            Givens { c: s * t, s }
        }
    }

    #[inline]
    pub fn apply(&self, a: &mut f64, b: &mut f64) {
        let (x, y) = (*a, *b);
        *a = self.c * x + self.s * y;
        *b = -self.s * x + self.c * y;
    }
}

/// Solve `min_y || beta e1 - H y ||_2` for an upper Hessenberg `H` of
/// shape `(j+1) x j` given by columns. Returns `(y, residual_norm)`.
pub fn least_squares_hessenberg(h_cols: &[Vec<f64>], beta: f64) -> (Vec<f64>, f64) {
    let j = h_cols.len();
    if j == 0 {
        return (Vec::new(), beta.abs());
    }
    let mut r = DenseMatrix::zeros(j + 1, j);
    for (col, hc) in h_cols.iter().enumerate() {
        assert!(hc.len() >= col + 2, "Hessenberg column too short");
        for i in 0..=(col + 1) {
            r[(i, col)] = hc[i];
        }
    }
    let mut g = vec![0.0; j + 1];
    g[0] = beta;
    let mut rotations: Vec<Givens> = Vec::with_capacity(j);
    for col in 0..j {
        for (i, rot) in rotations.iter().enumerate() {
            let (mut a, mut b) = (r[(i, col)], r[(i + 1, col)]);
            rot.apply(&mut a, &mut b);
            r[(i, col)] = a;
            r[(i + 1, col)] = b;
        }
        let rot = Givens::compute(r[(col, col)], r[(col + 1, col)]);
        let (mut a, mut b) = (r[(col, col)], r[(col + 1, col)]);
        rot.apply(&mut a, &mut b);
        r[(col, col)] = a;
        r[(col + 1, col)] = b;
        let (mut ga, mut gb) = (g[col], g[col + 1]);
        rot.apply(&mut ga, &mut gb);
        g[col] = ga;
        g[col + 1] = gb;
        rotations.push(rot);
    }
    // back substitution on the triangularized system
    let mut y = vec![0.0; j];
    for i in (0..j).rev() {
        let mut s = g[i];
        for k in (i + 1)..j {
            s -= r[(i, k)] * y[k];
        }
        y[i] = if r[(i, i)] != 0.0 { s / r[(i, i)] } else { 0.0 };
    }
    (y, g[j].abs())
}

// ---------------------------------------------------------------------
// sparse CSR + preconditioned CG
// ---------------------------------------------------------------------

/// Compressed sparse row matrix assembled from triplets.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &mut Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in triplets.iter() {
            debug_assert!(i < n && j < n);
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] = col_idx.len();
                last = Some((i, j));
            }
        }
        for i in 1..=n {
            if row_ptr[i] < row_ptr[i - 1] {
                row_ptr[i] = row_ptr[i - 1];
            }
        }
        CsrMatrix { n, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            out[i] = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] == i {
                    d[i] = self.values[k];
                }
            }
        }
        d
    }

    /// Largest |A_ij - A_ji| over all stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let aij = self.values[k];
                let aji = self.get(j, i);
                worst = worst.max((aij - aji).abs());
            }
        }
        worst
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            if self.col_idx[k] == j {
                return self.values[k];
            }
        }
        0.0
    }

    /// Symmetric Gauss-Seidel preconditioner application:
    /// solve `(D+L) D^{-1} (D+U) z = r`.
    pub fn sgs_apply(&self, r: &[f64], diag: &[f64], z: &mut [f64]) {
        let n = self.n;
        // forward solve (D+L) y = r
        for i in 0..n {
            let mut s = r[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                if j < i {
                    s -= self.values[k] * z[j];
                }
            }
            z[i] = s / diag[i];
        }
        // scale: y := D y
        for i in 0..n {
            z[i] *= diag[i];
        }
        // backward solve (D+U) z = y
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                if j > i {
                    s -= self.values[k] * z[j];
                }
            }
            z[i] = s / diag[i];
        }
    }
}

/// Preconditioned conjugate gradients with symmetric Gauss-Seidel
/// preconditioning. Converges on `||r|| <= rel_tol * ||b||`.
pub fn pcg_sgs(a: &CsrMatrix, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.n;
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let diag = a.diagonal();
    if diag.iter().any(|&d| d <= 0.0) {
        return Err(Error::Numerics(
            "diffusion matrix has a non-positive diagonal entry".into(),
        ));
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    a.sgs_apply(&r, &diag, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let tol = rel_tol * b_norm;
    let mut res_norm = norm2(&r);
    for _ in 0..max_iter {
        if res_norm <= tol {
            return Ok(x);
        }
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Numerics(format!(
                "CG detected an indefinite operator (p^T A p = {pap:.3e})"
            )));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        res_norm = norm2(&r);
        a.sgs_apply(&r, &diag, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res_norm <= tol {
        Ok(x)
    } else {
        Err(Error::Numerics(format!(
            "inner CG stalled after {max_iter} iterations: ||r|| = {res_norm:.3e}, target {tol:.3e}"
        )))
    }
}
