use crate::quadrature::gauss_legendre;
use crate::{Error, Result};

/// Tensor-product Legendre DG basis of degree `K` per direction.
///
/// The reference basis on [0,1] is the shifted orthonormal Legendre
/// family `l_p(s) = sqrt(2p+1) P_p(2s-1)`, so the per-cell mass matrix is
/// the identity and cross-section operators stay diagonal for
/// cell-constant material data.  Local dof `l = p_y * (K+1) + p_x`.
#[derive(Debug, Clone)]
pub struct DgBasis {
    pub order: usize,
    /// `adv[p][q] = \int_0^1 l_p'(s) l_q(s) ds`
    pub adv: Vec<Vec<f64>>,
    /// traces at s = 0 and s = 1
    pub trace0: Vec<f64>,
    pub trace1: Vec<f64>,
    /// (K+2)-point Gauss-Legendre rule mapped to [0,1], used for source
    /// and boundary-data integrals
    pub quad_points: Vec<f64>,
    pub quad_weights: Vec<f64>,
}

impl DgBasis {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Config(
                "DG order K = 0 is not supported: K >= 1 is required to preserve the diffusion limit"
                    .into(),
            ));
        }
        let n = order + 1;
        let (gl_nodes, gl_weights) = gauss_legendre(order + 2);
        let quad_points: Vec<f64> = gl_nodes.iter().map(|x| 0.5 * (x + 1.0)).collect();
        let quad_weights: Vec<f64> = gl_weights.iter().map(|w| 0.5 * w).collect();

        let mut adv = vec![vec![0.0; n]; n];
        for (s, w) in quad_points.iter().zip(&quad_weights) {
            for p in 0..n {
                let dp = eval_ref_deriv(p, *s);
                for q in 0..n {
                    adv[p][q] += w * dp * eval_ref(q, *s);
                }
            }
        }
        let trace0: Vec<f64> = (0..n).map(|p| eval_ref(p, 0.0)).collect();
        let trace1: Vec<f64> = (0..n).map(|p| eval_ref(p, 1.0)).collect();
        Ok(DgBasis { order, adv, trace0, trace1, quad_points, quad_weights })
    }

    /// Dofs per cell.
    pub fn dofs_per_cell(&self) -> usize {
        (self.order + 1) * (self.order + 1)
    }

    #[inline]
    pub fn local_index(&self, px: usize, py: usize) -> usize {
        py * (self.order + 1) + px
    }

    /// Evaluate local basis function on the reference cell [0,1]^2.
    pub fn eval_local(&self, local: usize, xi: f64, zeta: f64) -> f64 {
        let n = self.order + 1;
        eval_ref(local % n, xi) * eval_ref(local / n, zeta)
    }
}

/// Orthonormal shifted Legendre `l_p` on [0,1].
pub fn eval_ref(p: usize, s: f64) -> f64 {
    ((2 * p + 1) as f64).sqrt() * legendre(p, 2.0 * s - 1.0)
}

fn eval_ref_deriv(p: usize, s: f64) -> f64 {
    2.0 * ((2 * p + 1) as f64).sqrt() * legendre_deriv(p, 2.0 * s - 1.0)
}

fn legendre(p: usize, x: f64) -> f64 {
    match p {
        0 => 1.0,
        1 => x,
        _ => {
            let mut pm = 1.0;
            let mut pc = x;
            for k in 2..=p {
                let kf = k as f64;
                let pn = ((2.0 * kf - 1.0) * x * pc - (kf - 1.0) * pm) / kf;
                pm = pc;
                pc = pn;
            }
            pc
        }
    }
}

fn legendre_deriv(p: usize, x: f64) -> f64 {
    match p {
        0 => 0.0,
        1 => 1.0,
        _ => {
            // (1 - x^2) P_p' = p (P_{p-1} - x P_p); at the endpoints use
            // the closed form P_p'(+-1) = (+-1)^{p-1} p (p+1) / 2.
            if (x.abs() - 1.0).abs() < 1e-14 {
                let sign = if x > 0.0 { 1.0 } else { (-1.0_f64).powi(p as i32 - 1) };
                sign * (p * (p + 1)) as f64 / 2.0
            } else {
                (p as f64) * (legendre(p - 1, x) - x * legendre(p, x)) / (1.0 - x * x)
            }
        }
    }
}
