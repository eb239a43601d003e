use super::quadrature::QuadratureRule;
use crate::error::{Error, Result};

/// Fills `out[k] = h_k(t)` for the orthonormal probabilists' Hermite basis.
pub(crate) fn hermite_all_raw(t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = t;
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = (t * out[k] - kf.sqrt() * out[k - 1]) / (kf + 1.0).sqrt();
    }
}

/// Orthonormal probabilists' Hermite polynomials `h_j = He_j / sqrt(j!)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermiteBasis {
    max_degree: usize,
}

impl HermiteBasis {
    pub fn new(max_degree: usize) -> Self {
        Self { max_degree }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn eval(&self, j: usize, t: f64) -> Result<f64> {
        if j > self.max_degree {
            return Err(Error::DegreeOutOfRange {
                degree: j,
                max: self.max_degree,
            });
        }
        let mut v = vec![0.0; j + 1];
        hermite_all_raw(t, &mut v);
        Ok(v[j])
    }

    /// `h_0..=h_J` at `t`.
    pub fn eval_all(&self, t: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.max_degree + 1];
        hermite_all_raw(t, &mut v);
        v
    }

    /// `h_j'(t) = sqrt(j) h_{j-1}(t)`.
    pub fn derivative(&self, j: usize, t: f64) -> Result<f64> {
        if j == 0 {
            return Ok(0.0);
        }
        Ok((j as f64).sqrt() * self.eval(j - 1, t)?)
    }

    pub fn quadrature(&self, n: usize) -> Result<QuadratureRule> {
        QuadratureRule::gauss_hermite(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let h = HermiteBasis::new(12);
        assert_eq!(h.eval(0, 0.7).unwrap(), 1.0);
        assert!((h.eval(2, 0.0).unwrap() + 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((h.eval(3, 1.0).unwrap() + 2.0 / 6f64.sqrt()).abs() < 1e-15);
        let t = 1.3f64;
        let h4 = (t.powi(4) - 6.0 * t * t + 3.0) / 24f64.sqrt();
        assert!((h.eval(4, t).unwrap() - h4).abs() < 1e-14);
        assert!(h.eval(13, 0.0).is_err());
    }

    #[test]
    fn orthonormal_under_gauss_hermite() {
        let h = HermiteBasis::new(12);
        let rule = h.quadrature(40).unwrap();
        for i in 0..=12 {
            for j in 0..=12 {
                let ip = rule.integrate(|t| h.eval(i, t).unwrap() * h.eval(j, t).unwrap());
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((ip - target).abs() < 1e-10, "i={i} j={j} ip={ip}");
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = HermiteBasis::new(8);
        for j in 1..=8 {
            for &t in &[-1.7, -0.2, 0.4, 2.1] {
                let e = 1e-6;
                let fd = (h.eval(j, t + e).unwrap() - h.eval(j, t - e).unwrap()) / (2.0 * e);
                let an = h.derivative(j, t).unwrap();
                assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0));
            }
        }
    }
}
