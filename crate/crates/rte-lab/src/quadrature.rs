//! Chebyshev-Legendre product quadrature on the unit sphere.
//!
//! The rule CL(n_theta, n_z) is the tensor product of the equal-weight
//! n_theta-point Chebyshev rule on the unit circle with the normalized
//! n_z-point Gauss-Legendre rule for the z-component on [-1, 1].  Weights
//! sum to one, so angular averages `(1/4pi) \int f dOmega` are plain
//! weighted sums over the nodes.

use crate::{Error, Result};

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// A normalized angular quadrature rule with unit-sphere nodes.
///
/// Node ordering is fixed: the node with circle index `j1` (0-based) and
/// z index `j2` sits at flat index `j2 * n_theta + j1`, so rules are
/// bit-reproducible across runs.
#[derive(Debug, Clone)]
pub struct AngularQuadrature {
    pub n_theta: usize,
    pub n_z: usize,
    /// Unit direction vectors (x, y, z).
    pub nodes: Vec<[f64; 3]>,
    /// Positive weights summing to one.
    pub weights: Vec<f64>,
}

impl AngularQuadrature {
    /// Build the CL(n_theta, n_z) rule.
    pub fn chebyshev_legendre(n_theta: usize, n_z: usize) -> Result<Self> {
        if n_theta == 0 || n_z == 0 {
            return Err(Error::Domain(format!(
                "Chebyshev-Legendre rule needs at least one point per factor, got ({n_theta}, {n_z})"
            )));
        }
        let (z_nodes, z_weights) = gauss_legendre(n_z);
        let mut nodes = Vec::with_capacity(n_theta * n_z);
        let mut weights = Vec::with_capacity(n_theta * n_z);
        for j2 in 0..n_z {
            let z = z_nodes[j2];
            let rho = (1.0 - z * z).sqrt();
            for j1 in 0..n_theta {
                let theta = (2.0 * (j1 + 1) as f64 - 1.0) * std::f64::consts::PI / n_theta as f64;
                nodes.push([theta.cos() * rho, theta.sin() * rho, z]);
                // Chebyshev weight 1/n_theta times the normalized GL weight.
                weights.push(z_weights[j2] / (2.0 * n_theta as f64));
            }
        }
        Ok(AngularQuadrature { n_theta, n_z, nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weighted sum over nodes, the discrete angular average.
    pub fn integrate(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.len() {
            return Err(Error::Domain(format!(
                "expected {} angular samples, got {}",
                self.len(),
                samples.len()
            )));
        }
        Ok(self.weights.iter().zip(samples).map(|(w, f)| w * f).sum())
    }

    /// Discrete per-axis moments used by the diffusion preconditioner:
    /// for axis a, returns
    /// (sum_j w_j O_a^2, sum_j w_j |O_a|, sum_j w_j |O_a|^3).
    pub fn axis_moments(&self, axis: usize) -> (f64, f64, f64) {
        let mut m2 = 0.0;
        let mut a1 = 0.0;
        let mut a3 = 0.0;
        for (node, w) in self.nodes.iter().zip(&self.weights) {
            let v = node[axis];
            m2 += w * v * v;
            a1 += w * v.abs();
            a3 += w * v.abs().powi(3);
        }
        (m2, a1, a3)
    }
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1]
/// (weights sum to 2).  Nodes found by Newton iteration on P_n with
/// Chebyshev initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n / 2;
    for i in 0..half {
        let mut x = ((2 * i + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos();
        for _ in 0..NEWTON_MAX_ITER {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < NEWTON_TOL {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Chebyshev guesses start from the positive end
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        let (_, dp) = legendre_with_derivative(n, 0.0);
        nodes[half] = 0.0;
        weights[half] = 2.0 / (dp * dp);
    }
    (nodes, weights)
}

/// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    // P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1)
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Normalized analytic sphere integral of a monomial
    /// `(1/4pi) \int Ox^a Oy^b Oz^c dOmega`.
    fn analytic_monomial(a: u32, b: u32, c: u32) -> f64 {
        if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
            return 0.0;
        }
        fn double_factorial(k: i64) -> f64 {
            if k <= 0 {
                1.0
            } else {
                (k as f64) * double_factorial(k - 2)
            }
        }
        double_factorial(a as i64 - 1) * double_factorial(b as i64 - 1)
            * double_factorial(c as i64 - 1)
            / double_factorial((a + b + c) as i64 + 1)
    }

    #[test]
    fn rejects_zero_counts() {
        assert!(AngularQuadrature::chebyshev_legendre(0, 1).is_err());
        assert!(AngularQuadrature::chebyshev_legendre(1, 0).is_err());
    }

    #[test]
    fn cl_2_1_hand_values() {
        // theta_1 = pi/2, theta_2 = 3pi/2, single GL node z = 0
        let q = AngularQuadrature::chebyshev_legendre(2, 1).unwrap();
        assert_eq!(q.len(), 2);
        assert_relative_eq!(q.nodes[0][0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(q.nodes[0][1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(q.nodes[0][2], 0.0, epsilon = 1e-15);
        assert_relative_eq!(q.nodes[1][1], -1.0, epsilon = 1e-15);
        assert_eq!(q.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn cl_40_6_node_count() {
        let q = AngularQuadrature::chebyshev_legendre(40, 6).unwrap();
        assert_eq!(q.len(), 240);
    }

    #[test]
    fn weights_normalized_and_nodes_unit() {
        for (nt, nz) in [(1, 1), (2, 1), (4, 2), (7, 3), (16, 4), (40, 6)] {
            let q = AngularQuadrature::chebyshev_legendre(nt, nz).unwrap();
            let total: f64 = q.weights.iter().sum();
            assert!((total - 1.0).abs() <= 1e-14, "CL({nt},{nz}) weight sum {total}");
            for node in &q.nodes {
                let r = (node[0] * node[0] + node[1] * node[1] + node[2] * node[2]).sqrt();
                assert!((r - 1.0).abs() <= 1e-14);
            }
            assert!(q.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn reflection_symmetry_even_n_theta() {
        // (-Ox, -Oy, Oz) must be a node with the same weight
        for (nt, nz) in [(2, 1), (4, 2), (8, 4), (16, 3)] {
            let q = AngularQuadrature::chebyshev_legendre(nt, nz).unwrap();
            for (i, node) in q.nodes.iter().enumerate() {
                let mirrored = [-node[0], -node[1], node[2]];
                let found = q.nodes.iter().position(|m| {
                    (m[0] - mirrored[0]).abs() < 1e-13
                        && (m[1] - mirrored[1]).abs() < 1e-13
                        && (m[2] - mirrored[2]).abs() < 1e-13
                });
                let j = found.unwrap_or_else(|| panic!("missing mirror of node {i} in CL({nt},{nz})"));
                assert_relative_eq!(q.weights[i], q.weights[j], epsilon = 1e-16);
            }
        }
    }

    #[test]
    fn integrate_handles_basics() {
        let q = AngularQuadrature::chebyshev_legendre(4, 2).unwrap();
        let ones = vec![1.0; q.len()];
        assert_relative_eq!(q.integrate(&ones).unwrap(), 1.0, epsilon = 1e-14);
        let ox: Vec<f64> = q.nodes.iter().map(|n| n[0]).collect();
        assert!(q.integrate(&ox).unwrap().abs() <= 1e-14);
        let oxx: Vec<f64> = q.nodes.iter().map(|n| n[0] * n[0]).collect();
        assert_relative_eq!(q.integrate(&oxx).unwrap(), 1.0 / 3.0, epsilon = 1e-12);
        assert!(q.integrate(&[1.0]).is_err());
    }

    #[test]
    fn monomial_exactness_up_to_rule_degree() {
        for (nt, nz) in [(4, 2), (6, 3), (8, 4)] {
            let q = AngularQuadrature::chebyshev_legendre(nt, nz).unwrap();
            let dmax = (nt - 1).min(2 * nz - 1) as u32;
            for a in 0..=dmax {
                for b in 0..=(dmax - a) {
                    for c in 0..=(dmax - a - b) {
                        let samples: Vec<f64> = q
                            .nodes
                            .iter()
                            .map(|n| n[0].powi(a as i32) * n[1].powi(b as i32) * n[2].powi(c as i32))
                            .collect();
                        let got = q.integrate(&samples).unwrap();
                        let want = analytic_monomial(a, b, c);
                        assert!(
                            (got - want).abs() <= 1e-12,
                            "CL({nt},{nz}) monomial ({a},{b},{c}): got {got}, want {want}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn gauss_legendre_matches_known_rules() {
        let (n2, w2) = gauss_legendre(2);
        assert_relative_eq!(n2[1], 1.0 / 3.0_f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w2[0], 1.0, epsilon = 1e-15);
        let (n3, w3) = gauss_legendre(3);
        assert_relative_eq!(n3[2], (3.0_f64 / 5.0).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w3[1], 8.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(w3[0], 5.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn deterministic_rebuild() {
        let a = AngularQuadrature::chebyshev_legendre(16, 4).unwrap();
        let b = AngularQuadrature::chebyshev_legendre(16, 4).unwrap();
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.weights, b.weights);
    }

    proptest! {
        #[test]
        fn weights_always_sum_to_one(nt in 1usize..24, nz in 1usize..8) {
            let q = AngularQuadrature::chebyshev_legendre(nt, nz).unwrap();
            let total: f64 = q.weights.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-14);
            prop_assert_eq!(q.len(), nt * nz);
        }
    }
}
