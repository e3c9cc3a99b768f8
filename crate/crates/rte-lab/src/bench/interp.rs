//! Radial-basis-function interpolation of stored solutions, used to
//! build initial guesses from offline samples.  Thin-plate spline kernel
//! with a linear polynomial tail, so the interpolant is invariant under
//! affine rescalings of the (scattered) parameter samples.

use crate::linalg::DenseMatrix;
use crate::Result;

fn thin_plate(r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        r * r * r.ln()
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Interpolate the sampled vectors at `target`.  Fewer than two samples
/// degrade to nearest-neighbor lookup.
pub fn rbf_interpolate(samples: &[(Vec<f64>, Vec<f64>)], target: &[f64]) -> Result<Vec<f64>> {
    assert!(!samples.is_empty(), "interpolation needs at least one sample");
    if samples.len() < 2 {
        return Ok(samples[0].1.clone());
    }
    let k = samples.len();
    let d = target.len();
    let n_sys = k + 1 + d;
    let mut m = DenseMatrix::zeros(n_sys, n_sys);
    for i in 0..k {
        for j in 0..k {
            m[(i, j)] = thin_plate(distance(&samples[i].0, &samples[j].0));
        }
        m[(i, k)] = 1.0;
        m[(k, i)] = 1.0;
        for a in 0..d {
            m[(i, k + 1 + a)] = samples[i].0[a];
            m[(k + 1 + a, i)] = samples[i].0[a];
        }
    }
    let lu = match m.lu() {
        Ok(lu) => lu,
        Err(_) => {
            // degenerate sample geometry: nearest neighbor
            let nearest = samples
                .iter()
                .min_by(|a, b| {
                    distance(&a.0, target)
                        .partial_cmp(&distance(&b.0, target))
                        .unwrap()
                })
                .unwrap();
            return Ok(nearest.1.clone());
        }
    };
    // evaluation weights: lambda = M^{-1} [k(target); p(target)], then
    // the interpolant is sum lambda_i F_i over the sample block
    let mut rhs = vec![0.0; n_sys];
    for i in 0..k {
        rhs[i] = thin_plate(distance(&samples[i].0, target));
    }
    rhs[k] = 1.0;
    for a in 0..d {
        rhs[k + 1 + a] = target[a];
    }
    let lambda = lu.solve(&rhs);
    let n = samples[0].1.len();
    let mut out = vec![0.0; n];
    for (i, (_, f)) in samples.iter().enumerate() {
        let w = lambda[i];
        if w != 0.0 {
            for (o, v) in out.iter_mut().zip(f) {
                *o += w * v;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_samples_exactly() {
        let samples = vec![
            (vec![0.0, 0.0], vec![1.0, 2.0]),
            (vec![1.0, 0.0], vec![3.0, -1.0]),
            (vec![0.0, 1.0], vec![0.5, 0.5]),
            (vec![1.0, 1.0], vec![2.0, 2.0]),
        ];
        for (mu, f) in &samples {
            let got = rbf_interpolate(&samples, mu).unwrap();
            for (g, w) in got.iter().zip(f) {
                assert!((g - w).abs() <= 1e-9, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn single_sample_falls_back_to_it() {
        let samples = vec![(vec![0.3], vec![7.0, 8.0])];
        let got = rbf_interpolate(&samples, &[0.9]).unwrap();
        assert_eq!(got, vec![7.0, 8.0]);
    }

    #[test]
    fn reconstructs_linear_fields() {
        // linear field is in the polynomial tail, so interpolation is
        // exact anywhere
        let f = |x: f64, y: f64| 2.0 * x - y + 0.5;
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.4, 0.7]];
        let samples: Vec<(Vec<f64>, Vec<f64>)> =
            pts.iter().map(|p| (p.to_vec(), vec![f(p[0], p[1])])).collect();
        let got = rbf_interpolate(&samples, &[0.25, 0.65]).unwrap();
        assert!((got[0] - f(0.25, 0.65)).abs() <= 1e-9);
    }
}
