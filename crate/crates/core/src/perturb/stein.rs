use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{stream_rng, ScalarLaw};

/// Largest product-measure support enumerated exactly.
pub const MAX_ENUMERATION: usize = 1 << 20;
/// Rounding allowance added to the bound.
pub const ROUNDING_SLACK: f64 = 1e-12;

/// One-dimensional profile `g` of a ridge test function `h(x) = g(v·x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RidgeProfile {
    Linear,
    Cos,
    Sin,
    /// `e^{-u^2/2}`.
    Bump,
    /// `u e^{-u^2/2}`.
    OddBump,
    /// `u^3 e^{-u^2/2}`, a cubic damped at infinity.
    DampedCubic,
}

impl RidgeProfile {
    pub fn value(&self, u: f64) -> f64 {
        match self {
            RidgeProfile::Linear => u,
            RidgeProfile::Cos => u.cos(),
            RidgeProfile::Sin => u.sin(),
            RidgeProfile::Bump => (-0.5 * u * u).exp(),
            RidgeProfile::OddBump => u * (-0.5 * u * u).exp(),
            RidgeProfile::DampedCubic => u.powi(3) * (-0.5 * u * u).exp(),
        }
    }

    /// `E g(σZ)` for `Z ~ N(0, 1)`.
    pub fn gaussian_expectation(&self, sigma: f64) -> f64 {
        let s2 = sigma * sigma;
        match self {
            RidgeProfile::Cos => (-0.5 * s2).exp(),
            RidgeProfile::Bump => 1.0 / (1.0 + s2).sqrt(),
            RidgeProfile::Linear | RidgeProfile::Sin | RidgeProfile::OddBump | RidgeProfile::DampedCubic => 0.0,
        }
    }

    /// `sup_u |g'''(u)|`.
    pub fn third_derivative_sup(&self) -> f64 {
        match self {
            RidgeProfile::Linear => 0.0,
            RidgeProfile::Cos | RidgeProfile::Sin => 1.0,
            RidgeProfile::Bump => {
                // g''' = (3u - u^3) e^{-u^2/2}, extremal at u^2 = 3 - √6.
                let u2 = 3.0 - 6f64.sqrt();
                let u = u2.sqrt();
                (3.0 * u - u * u2) * (-0.5 * u2).exp()
            }
            RidgeProfile::OddBump => 3.0,
            RidgeProfile::DampedCubic => damped_cubic_third_sup(),
        }
    }
}

/// `g''' = (-u^6 + 12u^4 - 27u^2 + 6) e^{-u^2/2}`, maximized on a fine grid
/// refined by golden-section search around the best node.
fn damped_cubic_third_sup() -> f64 {
    let f = |u: f64| {
        let u2 = u * u;
        ((-u2 * u2 * u2 + 12.0 * u2 * u2 - 27.0 * u2 + 6.0) * (-0.5 * u2).exp()).abs()
    };
    let h = 1e-3;
    let best = (0..10_000)
        .map(|i| i as f64 * h)
        .fold(0.0, |b: f64, u| if f(u) > f(b) { u } else { b });
    let (mut a, mut b) = ((best - h).max(0.0), best + h);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f(0.5 * (a + b))
}

/// Outcome of comparing `E h(X)` under a product law with `E h(Z)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteinCheck {
    pub profile: RidgeProfile,
    pub dimension: usize,
    pub lhs: f64,
    /// Zero for exact enumeration.
    pub lhs_se: f64,
    pub rhs: f64,
    pub exact: bool,
    pub pass: bool,
}

/// Compares `|E h(X) - E h(Z)|` for `X` with i.i.d. `law` coordinates against
/// `(5/6) Σ τ_i^3 ‖∂_i^3 h‖_∞` with `h(x) = g(v·x)`. Discrete laws are
/// enumerated; other laws use `n` Monte-Carlo samples.
pub fn stein_bound_check(
    law: &ScalarLaw,
    profile: RidgeProfile,
    direction: &[f64],
    n: usize,
    seed: u64,
) -> Result<SteinCheck> {
    law.validate()?;
    let d = direction.len();
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let sigma = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    let reference = profile.gaussian_expectation(sigma);
    let tau3 = law.abs_third_moment();
    let rhs =
        5.0 / 6.0 * tau3 * profile.third_derivative_sup() * direction.iter().map(|v| v.abs().powi(3)).sum::<f64>();

    let atoms = law.atoms();
    let support = atoms.as_ref().and_then(|a| a.len().checked_pow(d as u32));
    let (mean, se, exact) = match (atoms, support) {
        (Some(atoms), Some(size)) if size <= MAX_ENUMERATION => {
            let mut total = 0.0;
            let mut idx = vec![0usize; d];
            for _ in 0..size {
                let (mut w, mut u) = (1.0, 0.0);
                for (i, &k) in idx.iter().enumerate() {
                    w *= atoms[k].1;
                    u += direction[i] * atoms[k].0;
                }
                total += w * profile.value(u);
                for k in idx.iter_mut() {
                    *k += 1;
                    if *k < atoms.len() {
                        break;
                    }
                    *k = 0;
                }
            }
            (total, 0.0, true)
        }
        _ => {
            if n < 2 {
                return Err(Error::InvalidParameter("Monte-Carlo Stein check needs n >= 2".into()));
            }
            let mut rng = stream_rng(seed, 0);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let u: f64 = direction.iter().map(|v| v * law.sample(&mut rng)).sum();
                let h = profile.value(u);
                s += h;
                s2 += h * h;
            }
            let nf = n as f64;
            let m = s / nf;
            (m, ((s2 / nf - m * m).max(0.0) / nf).sqrt(), false)
        }
    };
    let lhs = (mean - reference).abs();
    Ok(SteinCheck {
        profile,
        dimension: d,
        lhs,
        lhs_se: se,
        rhs,
        exact,
        pass: lhs <= rhs + 3.0 * se + ROUNDING_SLACK,
    })
}

/// Stein right-hand side for `h(x) = ψ(θ·x, θ*·x)` per unit bound on the
/// third partials of `ψ`: `(5/6) τ_3 Σ (|θ_i| + |θ*_i|)^3`.
pub fn stein_rhs_per_unit(law: &ScalarLaw, theta: &[f64], theta_star: &[f64]) -> f64 {
    5.0 / 6.0
        * law.abs_third_moment()
        * theta
            .iter()
            .zip(theta_star)
            .map(|(a, b)| (a.abs() + b.abs()).powi(3))
            .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f64]) -> Vec<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn rademacher_cosine_matches_closed_form() {
        let v = [0.5; 4];
        let c = stein_bound_check(&ScalarLaw::Rademacher, RidgeProfile::Cos, &v, 0, 0).unwrap();
        // E cos(v·X) = cos(1/2)^4 for Rademacher coordinates.
        let exact = (0.5f64.cos().powi(4) - (-0.5f64).exp()).abs();
        assert!((c.lhs - exact).abs() < 1e-15);
        assert!(c.exact && c.pass);
        assert!((c.rhs - 5.0 / 6.0 * 4.0 * 0.125).abs() < 1e-15);
    }

    #[test]
    fn linear_is_zero() {
        let c = stein_bound_check(
            &ScalarLaw::ThreePoint,
            RidgeProfile::Linear,
            &unit(&[1.0, 2.0, 3.0]),
            0,
            0,
        )
        .unwrap();
        assert!(c.lhs < 1e-15);
        assert_eq!(c.rhs, 0.0);
        assert!(c.pass);
    }

    #[test]
    fn damped_cubic_under_skewed_law() {
        let law = ScalarLaw::CenteredBernoulli { p: 0.2 };
        let c = stein_bound_check(&law, RidgeProfile::DampedCubic, &unit(&[1.0; 6]), 0, 0).unwrap();
        assert!(c.exact && c.pass && c.lhs > 0.0);
    }

    #[test]
    fn third_derivative_sups() {
        assert!((RidgeProfile::Bump.third_derivative_sup() - 1.380_119_046_160_749).abs() < 1e-14);
        let s = RidgeProfile::DampedCubic.third_derivative_sup();
        assert!((s - 6.079_798_518_412_906).abs() < 1e-12);
    }

    #[test]
    fn continuous_law_uses_monte_carlo() {
        let c = stein_bound_check(
            &ScalarLaw::Uniform,
            RidgeProfile::Cos,
            &unit(&[1.0, 1.0, 1.0]),
            200_000,
            4,
        )
        .unwrap();
        assert!(!c.exact && c.lhs_se > 0.0 && c.pass);
    }

    #[test]
    fn per_unit_rhs() {
        let e1 = [1.0, 0.0];
        let r = stein_rhs_per_unit(&ScalarLaw::Rademacher, &e1, &e1);
        assert!((r - 5.0 / 6.0 * 8.0).abs() < 1e-15);
    }
}
