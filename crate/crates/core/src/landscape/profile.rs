use std::io::Write;

use rand_distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;

use super::link::LinkFunction;
use crate::error::{Error, Result};
use crate::measures::{stream_rng, DistributionKind, InputDistribution};
use crate::orthopoly::{clenshaw_raw, eval_all_raw, ln_harmonic_dimension, QuadratureRule};

/// How the coefficients of a profile were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// Gegenbauer spectrum of a spherically symmetric law.
    SymmetricExact,
    /// Squared Hermite coefficients under the Gaussian.
    GaussianHermite,
}

/// Population loss as a function of the correlation `m`.
///
/// Symmetric profiles evaluate `ℓ(m) = 2 Σ_j β_j (1 - P_{j,d}(m))`, Gaussian
/// profiles `ℓ(m) = 2 Σ_j c_j^2 (1 - m^j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossProfile {
    pub kind: ProfileKind,
    /// Dimension `d` of the Gegenbauer basis; unused by Gaussian profiles.
    pub dimension: usize,
    /// `β_j` (or `c_j^2`) for `j = 0..=J`.
    pub coefficients: Vec<f64>,
    /// `‖φ‖^2` under the input law.
    pub energy: f64,
    /// `‖φ‖^2 - Σ_j β_j`, the mass beyond the truncation degree.
    pub energy_residual: f64,
}

/// Residual fraction above which a profile is flagged as under-resolved.
pub const TRUNCATION_WARNING: f64 = 0.01;

impl LossProfile {
    pub fn max_degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    pub fn coefficient_sum(&self) -> f64 {
        self.coefficients.iter().sum()
    }

    pub fn is_truncation_suspect(&self) -> bool {
        self.energy_residual.abs() > TRUNCATION_WARNING * self.energy.abs()
    }

    /// `ℓ(m)`.
    pub fn value(&self, m: f64) -> f64 {
        match self.kind {
            ProfileKind::SymmetricExact => {
                let d = self.dimension as f64;
                2.0 * (self.coefficient_sum() - clenshaw_raw(d, &self.coefficients, m))
            }
            ProfileKind::GaussianHermite => {
                let mut acc = 0.0;
                let mut p = 1.0;
                for c in &self.coefficients {
                    acc += c * (1.0 - p);
                    p *= m;
                }
                2.0 * acc
            }
        }
    }

    /// `ℓ'(m)`.
    pub fn derivative(&self, m: f64) -> f64 {
        match self.kind {
            ProfileKind::SymmetricExact => {
                let d = self.dimension as f64;
                let shifted: Vec<f64> = self
                    .coefficients
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(j, b)| {
                        let jf = j as f64;
                        b * jf * (jf + d - 2.0) / (d - 1.0)
                    })
                    .collect();
                -2.0 * clenshaw_raw(d + 2.0, &shifted, m)
            }
            ProfileKind::GaussianHermite => {
                let mut acc = 0.0;
                let mut p = 1.0;
                for (j, c) in self.coefficients.iter().enumerate().skip(1) {
                    acc += j as f64 * c * p;
                    p *= m;
                }
                -2.0 * acc
            }
        }
    }

    /// `-∇^S L(θ)·θ* = -(1 - m^2) ℓ'(m)`.
    pub fn projected_gradient(&self, m: f64) -> f64 {
        -(1.0 - m * m) * self.derivative(m)
    }

    /// CSV with columns `j, beta_j`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "beta_j"])?;
        for (j, b) in self.coefficients.iter().enumerate() {
            w.write_record([j.to_string(), b.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with columns `m, loss, projected_gradient` on `points` evenly spaced
    /// correlations in `[-1, 1]`.
    pub fn write_curve_csv<W: Write>(&self, points: usize, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["m", "loss", "projected_gradient"])?;
        for i in 0..points {
            let m = -1.0 + 2.0 * i as f64 / (points.max(2) - 1) as f64;
            w.write_record([
                m.to_string(),
                self.value(m).to_string(),
                self.projected_gradient(m).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn quadrature_nodes(max_degree: usize) -> usize {
    (2 * max_degree + 16).max(128)
}

/// Gegenbauer spectrum `β_{j,d}`, `j <= J`, of `φ` under a law supported on
/// finitely many spheres: `β_j = Σ_r w_r N(j,d) <φ(r ·), P_{j,d}>^2_{u_d}`.
pub fn beta_coefficients(link: &LinkFunction, dist: &InputDistribution, max_degree: usize) -> Result<LossProfile> {
    link.validate()?;
    dist.validate()?;
    let atoms = dist.radial_atoms().ok_or(Error::NotSphericallySymmetric)?;
    let d = dist.dimension;
    let df = d as f64;
    let rule = QuadratureRule::gegenbauer(d, quadrature_nodes(max_degree))?;
    let mut table = vec![0.0; rule.len() * (max_degree + 1)];
    for (k, &t) in rule.nodes.iter().enumerate() {
        eval_all_raw(df, t, &mut table[k * (max_degree + 1)..(k + 1) * (max_degree + 1)]);
    }
    let samples: Vec<Vec<f64>> = atoms
        .iter()
        .map(|&(r, _)| rule.nodes.iter().map(|&t| link.value(r * t)).collect())
        .collect();
    let coefficients: Vec<f64> = (0..=max_degree)
        .into_par_iter()
        .map(|j| {
            let n_j = ln_harmonic_dimension(j, d).exp();
            atoms
                .iter()
                .zip(&samples)
                .map(|(&(_, w), f)| {
                    let ip: f64 = f
                        .iter()
                        .zip(&rule.weights)
                        .enumerate()
                        .map(|(k, (fk, wk))| wk * fk * table[k * (max_degree + 1) + j])
                        .sum();
                    w * n_j * ip * ip
                })
                .sum::<f64>()
        })
        .collect();
    let energy: f64 = atoms
        .iter()
        .zip(&samples)
        .map(|(&(_, w), f)| w * f.iter().zip(&rule.weights).map(|(v, wk)| wk * v * v).sum::<f64>())
        .sum();
    let profile = LossProfile {
        kind: ProfileKind::SymmetricExact,
        dimension: d,
        energy_residual: energy - coefficients.iter().sum::<f64>(),
        coefficients,
        energy,
    };
    if profile.is_truncation_suspect() {
        log::warn!(
            "energy residual {:.3e} of {:.3e} exceeds 1%; increase the truncation degree beyond {}",
            profile.energy_residual,
            profile.energy,
            max_degree
        );
    }
    Ok(profile)
}

/// Gaussian reference profile from the Hermite coefficients `c_j = <φ, h_j>_γ`.
pub fn gaussian_profile(link: &LinkFunction, max_degree: usize) -> Result<LossProfile> {
    link.validate()?;
    let rule = QuadratureRule::gauss_hermite(quadrature_nodes(max_degree))?;
    let mut h = vec![0.0; max_degree + 1];
    let mut c = vec![0.0; max_degree + 1];
    let mut energy = 0.0;
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let f = link.value(t);
        crate::orthopoly::hermite_all_raw(t, &mut h);
        for (cj, hj) in c.iter_mut().zip(&h) {
            *cj += w * f * hj;
        }
        energy += w * f * f;
    }
    let coefficients: Vec<f64> = c.iter().map(|v| v * v).collect();
    Ok(LossProfile {
        kind: ProfileKind::GaussianHermite,
        dimension: 0,
        energy_residual: energy - coefficients.iter().sum::<f64>(),
        coefficients,
        energy,
    })
}

/// Profile matching the law: Gaussian profile for the Gaussian, Gegenbauer
/// spectrum for finitely supported radial laws.
pub fn profile_for(link: &LinkFunction, dist: &InputDistribution, max_degree: usize) -> Result<LossProfile> {
    match dist.kind {
        DistributionKind::Gaussian => gaussian_profile(link, max_degree),
        _ => beta_coefficients(link, dist, max_degree),
    }
}

/// Relative threshold for treating a coefficient as nonzero.
pub const EXPONENT_TOLERANCE: f64 = 1e-8;

fn first_significant(values: &[f64], tol: f64) -> Result<usize> {
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateLink);
    }
    values
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, &b)| b > tol * total)
        .map(|(j, _)| j)
        .ok_or(Error::DegenerateLink)
}

/// Smallest `j >= 1` with `β_j > tol · Σ_i β_i`.
pub fn information_exponent(profile: &LossProfile, tol: f64) -> Result<usize> {
    first_significant(&profile.coefficients, tol)
}

/// Discrete rule for the one-dimensional marginal `η` of `x·θ`.
pub fn marginal_rule(dist: &InputDistribution, nodes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    match &dist.kind {
        DistributionKind::Gaussian => {
            let r = QuadratureRule::gauss_hermite(nodes)?;
            Ok((r.nodes, r.weights))
        }
        DistributionKind::Product { .. } => Err(Error::NotSphericallySymmetric),
        _ => {
            let rule = QuadratureRule::gegenbauer(dist.dimension, nodes)?;
            let mut xs = Vec::new();
            let mut ws = Vec::new();
            for (r, w) in dist.radial_atoms().expect("radial law") {
                for (&t, &wk) in rule.nodes.iter().zip(&rule.weights) {
                    xs.push(r * t);
                    ws.push(w * wk);
                }
            }
            Ok((xs, ws))
        }
    }
}

/// Squared normalized coefficients `<φ, q_j>^2_η / ‖q_j‖^2` in the orthogonal
/// polynomial basis of the marginal `η`, built by the discrete Stieltjes
/// procedure on the marginal rule.
pub fn marginal_spectrum(link: &LinkFunction, dist: &InputDistribution, max_degree: usize) -> Result<Vec<f64>> {
    let (xs, ws) = marginal_rule(dist, quadrature_nodes(max_degree))?;
    let f: Vec<f64> = xs.iter().map(|&x| link.value(x)).collect();
    let n = xs.len();
    let mut prev = vec![0.0; n];
    let mut cur = vec![1.0; n];
    let mut norm_prev = 1.0;
    let mut out = Vec::with_capacity(max_degree + 1);
    for j in 0..=max_degree {
        let norm: f64 = cur.iter().zip(&ws).map(|(q, w)| w * q * q).sum();
        let ip: f64 = cur.iter().zip(&ws).zip(&f).map(|((q, w), fv)| w * q * fv).sum();
        out.push(ip * ip / norm);
        if j == max_degree {
            break;
        }
        let a: f64 = cur
            .iter()
            .zip(&ws)
            .zip(&xs)
            .map(|((q, w), x)| w * x * q * q)
            .sum::<f64>()
            / norm;
        let b = if j == 0 { 0.0 } else { norm / norm_prev };
        let next: Vec<f64> = (0..n).map(|k| (xs[k] - a) * cur[k] - b * prev[k]).collect();
        prev = std::mem::replace(&mut cur, next);
        norm_prev = norm;
    }
    Ok(out)
}

/// Information exponent `s` and the marginal exponent `s̃`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExponentReport {
    pub s: usize,
    pub s_tilde: usize,
}

/// Computes both exponents and checks `s <= s̃`.
pub fn exponent_report(
    profile: &LossProfile,
    link: &LinkFunction,
    dist: &InputDistribution,
    tol: f64,
) -> Result<ExponentReport> {
    let s = information_exponent(profile, tol)?;
    let s_tilde = first_significant(&marginal_spectrum(link, dist, profile.max_degree())?, tol)?;
    if s > s_tilde {
        return Err(Error::ExponentMismatch { s, s_tilde });
    }
    Ok(ExponentReport { s, s_tilde })
}

/// `(E φ^4, E φ'^4)` under the marginal of a symmetric or Gaussian law.
pub fn sobolev_moments(link: &LinkFunction, dist: &InputDistribution) -> Result<(f64, f64)> {
    let (xs, ws) = marginal_rule(dist, 160)?;
    let mut m = (0.0, 0.0);
    for (&x, &w) in xs.iter().zip(&ws) {
        let (v, dv) = link.value_and_derivative(x);
        m.0 += w * v.powi(4);
        m.1 += w * dv.powi(4);
    }
    Ok(m)
}

/// Monte-Carlo estimate of `L(θ) = E(φ(x·θ) - φ(x·θ*))^2` with its standard error.
pub fn monte_carlo_loss(
    link: &LinkFunction,
    dist: &InputDistribution,
    theta: &[f64],
    theta_star: &[f64],
    n: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = stream_rng(seed, 0);
    let mut x = vec![0.0; dist.dimension];
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        dist.sample_into(&mut rng, &mut x);
        let u: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
        let v: f64 = x.iter().zip(theta_star).map(|(a, b)| a * b).sum();
        let l = (link.value(u) - link.value(v)).powi(2);
        s1 += l;
        s2 += l * l;
    }
    let nf = n as f64;
    let mean = s1 / nf;
    let var = (s2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0).max(1.0);
    (mean, (var / nf).sqrt())
}

/// Unit vector with prescribed correlation `m` to `theta_star`, the orthogonal
/// part drawn uniformly.
pub fn vector_at_correlation(theta_star: &[f64], m: f64, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, stream);
    let d = theta_star.len();
    let mut u: Vec<f64> = (0..d).map(|_| rand_distr::StandardNormal.sample(&mut rng)).collect();
    let proj: f64 = u.iter().zip(theta_star).map(|(a, b)| a * b).sum();
    for (ui, si) in u.iter_mut().zip(theta_star) {
        *ui -= proj * si;
    }
    let n = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    let s = (1.0 - m * m).max(0.0).sqrt() / n;
    u.iter().zip(theta_star).map(|(ui, si)| m * si + s * ui).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(d: usize) -> InputDistribution {
        InputDistribution::sphere(d)
    }

    #[test]
    fn pure_gegenbauer_spectrum() {
        let d = 50;
        let p = beta_coefficients(&LinkFunction::gegenbauer(4, d), &sphere(d), 12).unwrap();
        let n4 = crate::orthopoly::harmonic_dimension(4, d);
        for (j, b) in p.coefficients.iter().enumerate() {
            if j == 4 {
                assert!((b - 1.0 / n4).abs() < 1e-12 / n4);
            } else {
                assert!(b.abs() < 1e-20, "j={j} b={b}");
            }
        }
        let q = beta_coefficients(&LinkFunction::gegenbauer_orthonormal(4, d), &sphere(d), 12).unwrap();
        assert!((q.coefficients[4] - 1.0).abs() < 1e-10);
        assert!(((q.energy - q.coefficient_sum()) / q.energy).abs() < 1e-6);
    }

    #[test]
    fn linear_link_spectrum() {
        let d = 30;
        let p = beta_coefficients(&LinkFunction::Linear, &sphere(d), 10).unwrap();
        assert!((p.coefficients[1] - 1.0).abs() < 1e-12);
        for (j, b) in p.coefficients.iter().enumerate() {
            if j != 1 {
                assert!(b.abs() < 1e-20);
            }
        }
    }

    #[test]
    fn cubic_hermite_on_sphere() {
        let d = 50;
        let p = beta_coefficients(&LinkFunction::hermite_pure(3), &sphere(d), 10).unwrap();
        let b1 = 6.0 / ((d + 2) as f64).powi(2);
        assert!((p.coefficients[1] - b1).abs() < 1e-12);
        assert!(p.coefficients[2].abs() < 1e-20);
        assert!(p.coefficients[3] > 0.5);
        assert!(((p.energy - p.coefficient_sum()) / p.energy).abs() < 1e-10);
        assert_eq!(information_exponent(&p, EXPONENT_TOLERANCE).unwrap(), 1);
    }

    #[test]
    fn gaussian_profiles() {
        let p = gaussian_profile(&LinkFunction::hermite_pure(2), 8).unwrap();
        for &m in &[-0.7, 0.0, 0.4, 1.0] {
            assert!((p.value(m) - 2.0 * (1.0 - m * m)).abs() < 1e-12);
        }
        let mix = gaussian_profile(&LinkFunction::hermite(vec![0.0, 0.0, 0.5, -0.5, -0.5, 0.5]), 10).unwrap();
        for &m in &[-0.5f64, 0.1, 0.8] {
            let expect: f64 = 0.5 * (2..=5).map(|j| 1.0 - m.powi(j)).sum::<f64>();
            assert!((mix.value(m) - expect).abs() < 1e-12);
        }
        assert_eq!(mix.value(1.0), 0.0);
        let h3 = gaussian_profile(&LinkFunction::hermite_pure(3), 8).unwrap();
        assert_eq!(information_exponent(&h3, EXPONENT_TOLERANCE).unwrap(), 3);
        assert_eq!(information_exponent(&p, EXPONENT_TOLERANCE).unwrap(), 2);
    }

    #[test]
    fn exponents_and_marginal_crosscheck() {
        let d = 40;
        let mono = LinkFunction::MonotoneSine { amplitude: 0.1 };
        let p = beta_coefficients(&mono, &sphere(d), 32).unwrap();
        let r = exponent_report(&p, &mono, &sphere(d), EXPONENT_TOLERANCE).unwrap();
        assert_eq!(r, ExponentReport { s: 1, s_tilde: 1 });
        let g4 = LinkFunction::gegenbauer(4, d);
        let p4 = beta_coefficients(&g4, &sphere(d), 12).unwrap();
        let r4 = exponent_report(&p4, &g4, &sphere(d), EXPONENT_TOLERANCE).unwrap();
        assert_eq!(r4, ExponentReport { s: 4, s_tilde: 4 });
        let gauss = InputDistribution::gaussian(d);
        let h3 = LinkFunction::hermite_pure(3);
        let pg = gaussian_profile(&h3, 10).unwrap();
        assert_eq!(
            exponent_report(&pg, &h3, &gauss, EXPONENT_TOLERANCE).unwrap().s_tilde,
            3
        );
    }

    #[test]
    fn constant_link_is_degenerate() {
        let c = LinkFunction::hermite(vec![2.0]);
        let p = gaussian_profile(&c, 4).unwrap();
        assert_eq!(information_exponent(&p, EXPONENT_TOLERANCE), Err(Error::DegenerateLink));
    }

    #[test]
    fn product_law_rejected() {
        let dist = InputDistribution::product(10, crate::measures::ScalarLaw::Uniform);
        assert_eq!(
            beta_coefficients(&LinkFunction::Linear, &dist, 4).unwrap_err(),
            Error::NotSphericallySymmetric
        );
    }

    #[test]
    fn profile_derivative_matches_finite_differences() {
        let d = 25;
        let link = LinkFunction::MonotoneSine { amplitude: 0.3 };
        let p = beta_coefficients(&link, &sphere(d), 32).unwrap();
        for i in 1..40 {
            let m = -0.975 + i as f64 * 0.049;
            let h = 1e-6;
            let fd = (p.value(m + h) - p.value(m - h)) / (2.0 * h);
            let an = p.derivative(m);
            assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "m={m}");
        }
        let q = beta_coefficients(&LinkFunction::gegenbauer(2, d), &sphere(d), 6).unwrap();
        let m = 0.37;
        let expect = 2.0 * (1.0 - m * m) * q.coefficients[2] * 2.0 * d as f64 / (d as f64 - 1.0) * m;
        assert!((q.projected_gradient(m) - expect).abs() < 1e-15);
    }

    #[test]
    fn degree_four_adverse_slope() {
        let d = 50;
        let p = beta_coefficients(&LinkFunction::gegenbauer(4, d), &sphere(d), 8).unwrap();
        assert!(p.projected_gradient(0.2) < 0.0);
        assert!(p.projected_gradient(0.5) > 0.0);
        assert!(p.projected_gradient(1.0).abs() < 1e-15);
    }

    #[test]
    fn loss_nonnegative_and_zero_at_one() {
        let d = 20;
        for link in [
            LinkFunction::MonotoneSine { amplitude: 0.5 },
            LinkFunction::hermite(vec![0.3, 0.0, 0.5, -0.5, -0.5, 0.5]),
        ] {
            let p = beta_coefficients(&link, &sphere(d), 24).unwrap();
            assert!(p.value(1.0).abs() < 1e-13);
            for i in 0..=200 {
                assert!(p.value(-1.0 + i as f64 / 100.0) >= -1e-12);
            }
        }
    }

    #[test]
    fn correlation_vector() {
        let mut star = vec![0.0; 12];
        star[3] = 1.0;
        let v = vector_at_correlation(&star, 0.4, 1, 2);
        assert!((v[3] - 0.4).abs() < 1e-15);
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
