use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use super::link::LinkFunction;
use super::profile::{marginal_rule, LossProfile, ProfileKind};
use crate::error::{Error, Result};
use crate::measures::InputDistribution;
use crate::orthopoly::GegenbauerBasis;

/// Numerical certificate for `-∇^S L·θ* >= C (1 - m)(m - b)^{k-1}` on `[b, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpgCertificate {
    pub order: usize,
    pub scale: f64,
    /// Largest `C >= 0` valid on the grid.
    pub constant: f64,
    pub grid: Vec<f64>,
    /// `min_grid [g(m) - C (1 - m)(m - b)^{k-1}]`.
    pub margin: f64,
    pub pass: bool,
}

/// Smallest certified constant counted as positive.
pub const LPG_MIN_CONSTANT: f64 = 1e-9;

/// Certifies local polynomial growth of order `k` beyond `b` on the grid
/// `{b} ∪ {i / grid_size : b < i / grid_size < 1}`. Aligning the grid
/// globally makes certificates comparable across `b`.
pub fn lpg_certify(profile: &LossProfile, k: usize, b: f64, grid_size: usize) -> Result<LpgCertificate> {
    if k == 0 || !(0.0..1.0).contains(&b) || grid_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "lpg needs k >= 1, b in [0, 1), grid >= 2 (got k={k}, b={b}, grid={grid_size})"
        )));
    }
    let mut grid = vec![b];
    grid.extend((1..grid_size).map(|i| i as f64 / grid_size as f64).filter(|&m| m > b));
    let shape = |m: f64| (1.0 - m) * (m - b).powi(k as i32 - 1);
    let g: Vec<f64> = grid.iter().map(|&m| profile.projected_gradient(m)).collect();
    let mut ratio = f64::INFINITY;
    for (&m, &gm) in grid.iter().zip(&g) {
        let s = shape(m);
        if s > 0.0 {
            ratio = ratio.min(gm / s);
        } else if gm < 0.0 {
            ratio = ratio.min(f64::NEG_INFINITY);
        }
    }
    let constant = if ratio.is_finite() { ratio.max(0.0) } else { 0.0 };
    let margin = grid
        .iter()
        .zip(&g)
        .map(|(&m, &gm)| gm - constant * shape(m))
        .fold(f64::INFINITY, f64::min);
    Ok(LpgCertificate {
        order: k,
        scale: b,
        constant,
        grid,
        margin,
        pass: constant > LPG_MIN_CONSTANT && margin >= -1e-12,
    })
}

/// Spectral tail condition for a symmetric profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub s: usize,
    pub beta_s: f64,
    /// `Σ_{j>s} β_j j(j+d-2) υ_{j-1,d+2}`.
    pub tail_sum: f64,
    /// `K d^{(3-s)/2}`.
    pub scale: f64,
    pub ratio: f64,
    pub passes: bool,
}

pub fn spectral_condition_check(profile: &LossProfile, s: usize, k_const: f64) -> Result<SpectralReport> {
    if profile.kind != ProfileKind::SymmetricExact {
        return Err(Error::Unsupported("spectral check needs a symmetric profile".into()));
    }
    let d = profile.dimension;
    let shifted = GegenbauerBasis::new(d + 2, profile.max_degree())?;
    let mut tail = 0.0;
    for (j, &b) in profile.coefficients.iter().enumerate().skip(s + 1) {
        if b == 0.0 || j < 3 {
            continue;
        }
        let jf = j as f64;
        tail += b * jf * (jf + d as f64 - 2.0) * shifted.upsilon(j - 1)?;
    }
    let scale = k_const * (d as f64).powf((3.0 - s as f64) / 2.0);
    let ratio = tail / scale;
    Ok(SpectralReport {
        s,
        beta_s: profile.coefficients.get(s).copied().unwrap_or(0.0),
        tail_sum: tail,
        scale,
        ratio,
        passes: ratio <= 1.0,
    })
}

/// Derivative-energy comparison for a symmetric profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeEnergyReport {
    /// `Σ_j j^2 β_j`.
    pub weighted_sum: f64,
    /// `Σ_j j(j+d-2) β_j`.
    pub dirichlet_sum: f64,
    /// `E[r^2 (1 - t^2) φ'(r t)^2]`, equal to `dirichlet_sum` up to truncation.
    pub dirichlet_direct: f64,
    /// `sqrt(E r^4 · E_η φ'^4)`.
    pub tight_bound: f64,
    /// `tight_bound` times `Γ((d-1)/2) / (√π Γ((d-2)/2))`.
    pub sphere_ratio_bound: f64,
}

pub fn derivative_energy_check(
    profile: &LossProfile,
    link: &LinkFunction,
    dist: &InputDistribution,
) -> Result<DerivativeEnergyReport> {
    let atoms = dist.radial_atoms().ok_or(Error::NotSphericallySymmetric)?;
    let d = dist.dimension as f64;
    let (mut weighted, mut dirichlet) = (0.0, 0.0);
    for (j, b) in profile.coefficients.iter().enumerate() {
        let jf = j as f64;
        weighted += jf * jf * b;
        dirichlet += jf * (jf + d - 2.0) * b;
    }
    let rule = crate::orthopoly::QuadratureRule::gegenbauer(dist.dimension, 160)?;
    let mut direct = 0.0;
    for &(r, w) in &atoms {
        direct += w * rule.integrate(|t| r * r * (1.0 - t * t) * link.derivative(r * t).powi(2));
    }
    let r4: f64 = atoms.iter().map(|(r, w)| w * r.powi(4)).sum();
    let (xs, ws) = marginal_rule(dist, 160)?;
    let dphi4: f64 = xs.iter().zip(&ws).map(|(&x, &w)| w * link.derivative(x).powi(4)).sum();
    let tight = (r4 * dphi4).sqrt();
    let factor = (ln_gamma((d - 1.0) / 2.0) - 0.5 * std::f64::consts::PI.ln() - ln_gamma((d - 2.0) / 2.0)).exp();
    Ok(DerivativeEnergyReport {
        weighted_sum: weighted,
        dirichlet_sum: dirichlet,
        dirichlet_direct: direct,
        tight_bound: tight,
        sphere_ratio_bound: factor * tight,
    })
}
