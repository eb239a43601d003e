use statrs::function::beta::ln_beta;

use super::gegenbauer::jacobi_offdiag_sq;
use super::tridiag::eigen_first_row;
use crate::error::{Error, Result};

/// Gauss rule for a probability measure on the line.
///
/// Weights sum to one. `log_mass` holds the log of the total mass of the
/// unnormalized weight function, so absolute integrals are recovered by
/// scaling with `exp(log_mass)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub log_mass: f64,
}

impl QuadratureRule {
    /// Gauss-Jacobi rule with `alpha = beta = (d-3)/2`, i.e. for
    /// `u_d(dt) ∝ (1 - t^2)^{(d-3)/2} dt` on `[-1, 1]`.
    pub fn gegenbauer(d: usize, n: usize) -> Result<Self> {
        if d < 3 {
            return Err(Error::InvalidDimension(d));
        }
        let df = d as f64;
        let off: Vec<f64> = (1..n).map(|k| jacobi_offdiag_sq(df, k).sqrt()).collect();
        let log_mass = ln_beta(0.5, (df - 1.0) / 2.0);
        Self::golub_welsch(n, &off, log_mass)
    }

    /// Gauss-Hermite rule for the standard Gaussian.
    pub fn gauss_hermite(n: usize) -> Result<Self> {
        let off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
        Self::golub_welsch(n, &off, 0.5 * (2.0 * std::f64::consts::PI).ln())
    }

    fn golub_welsch(n: usize, off: &[f64], log_mass: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("quadrature needs n >= 1".into()));
        }
        let (mut nodes, first) = eigen_first_row(&vec![0.0; n], off)?;
        let mut weights: Vec<f64> = first.iter().map(|v| v * v).collect();
        // Symmetric weight functions give symmetric rules.
        for k in 0..n / 2 {
            let x = 0.5 * (nodes[n - 1 - k] - nodes[k]);
            let w = 0.5 * (weights[n - 1 - k] + weights[k]);
            nodes[k] = -x;
            nodes[n - 1 - k] = x;
            weights[k] = w;
            weights[n - 1 - k] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self {
            nodes,
            weights,
            log_mass,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Expectation of `f` under the normalized measure.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Weights for the unnormalized weight function.
    pub fn unnormalized_weights(&self) -> Vec<f64> {
        let m = self.log_mass.exp();
        self.weights.iter().map(|w| w * m).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::ln_gamma;

    /// `E t^{2k}` under `u_d`, a ratio of Beta functions.
    fn even_moment(d: usize, k: usize) -> f64 {
        let h = d as f64 / 2.0;
        let kf = k as f64;
        (ln_gamma(kf + 0.5) + ln_gamma(h) - ln_gamma(0.5) - ln_gamma(h + kf)).exp()
    }

    #[test]
    fn legendre_for_d3() {
        let rule = QuadratureRule::gegenbauer(3, 5).unwrap();
        let w = rule.unnormalized_weights();
        let x3 = (5.0f64 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
        let w3 = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
        assert!((rule.nodes[3] - x3).abs() < 1e-14);
        assert!((w[3] - w3).abs() < 1e-14);
        assert!((w[2] - 128.0 / 225.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn second_moment_is_inverse_dimension() {
        for d in [3, 4, 10, 50, 200, 1000] {
            let rule = QuadratureRule::gegenbauer(d, 8).unwrap();
            let m2 = rule.integrate(|t| t * t);
            assert!((m2 - 1.0 / d as f64).abs() < 1e-12 * 1.0f64.max(1.0 / d as f64));
        }
    }

    #[test]
    fn exact_up_to_degree_2n_minus_1() {
        for d in [4, 10, 50, 200] {
            let n = 12;
            let rule = QuadratureRule::gegenbauer(d, n).unwrap();
            for k in 0..n {
                let q = rule.integrate(|t| t.powi(2 * k as i32));
                let exact = even_moment(d, k);
                assert!(((q - exact) / exact).abs() < 1e-10, "d={d} k={k}");
                let odd = rule.integrate(|t| t.powi(2 * k as i32 + 1));
                assert!(odd.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn weights_positive_and_log_mass() {
        let rule = QuadratureRule::gegenbauer(4000, 40).unwrap();
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        assert!(rule.log_mass.is_finite());
        let d3 = QuadratureRule::gegenbauer(3, 2).unwrap();
        assert!((d3.log_mass.exp() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn gauss_hermite_moments() {
        let rule = QuadratureRule::gauss_hermite(10).unwrap();
        let expected = [1.0, 1.0, 3.0, 15.0, 105.0, 945.0];
        for (k, e) in expected.iter().enumerate() {
            let q = rule.integrate(|t| t.powi(2 * k as i32));
            assert!((q - e).abs() < 1e-11 * e, "k={k}");
        }
    }
}
