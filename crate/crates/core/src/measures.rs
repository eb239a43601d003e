//! Input distributions: samplers, scalar laws for product measures, the
//! one-dimensional marginal `u_d` of the uniform sphere and the tail of the
//! initial correlation.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Deterministic RNG for `(seed, stream)`; distinct streams never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Mean-zero, unit-variance scalar law for product measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarLaw {
    /// Uniform on `[-√3, √3]`.
    Uniform,
    /// `±1` with equal probability.
    Rademacher,
    /// `±√3` with probability 1/6 each, 0 otherwise.
    ThreePoint,
    /// `√((1-p)/p)` with probability `p`, `-√(p/(1-p))` otherwise.
    CenteredBernoulli { p: f64 },
    /// Quantile function tabulated on an even grid of `[0, 1]`, linear in between.
    QuantileTable { values: Vec<f64> },
}

impl ScalarLaw {
    /// Builds a quantile table shifted and scaled to mean 0 and variance 1.
    pub fn standardized_table(values: Vec<f64>) -> Result<Self> {
        let raw = ScalarLaw::QuantileTable { values };
        let (mean, var) = raw.table_moments()?;
        if var <= 0.0 {
            return Err(Error::InvalidDistribution("quantile table is constant".into()));
        }
        let s = var.sqrt();
        match raw {
            ScalarLaw::QuantileTable { values } => Ok(ScalarLaw::QuantileTable {
                values: values.iter().map(|v| (v - mean) / s).collect(),
            }),
            _ => unreachable!(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScalarLaw::CenteredBernoulli { p } if !(*p > 0.0 && *p < 1.0) => Err(Error::InvalidDistribution(format!(
                "bernoulli parameter {p} outside (0, 1)"
            ))),
            ScalarLaw::QuantileTable { .. } => {
                let (mean, var) = self.table_moments()?;
                if mean.abs() > 1e-6 || (var - 1.0).abs() > 1e-6 {
                    return Err(Error::InvalidDistribution(format!(
                        "quantile table not standardized (mean {mean}, variance {var})"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn table_moments(&self) -> Result<(f64, f64)> {
        let ScalarLaw::QuantileTable { values } = self else {
            unreachable!()
        };
        if values.len() < 2 {
            return Err(Error::InvalidDistribution("quantile table needs >= 2 values".into()));
        }
        if values.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::InvalidDistribution(
                "quantile table must be nondecreasing".into(),
            ));
        }
        let h = 1.0 / (values.len() - 1) as f64;
        let (mut m1, mut m2) = (0.0, 0.0);
        for w in values.windows(2) {
            m1 += 0.5 * (w[0] + w[1]) * h;
            m2 += (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]) / 3.0 * h;
        }
        Ok((m1, m2 - m1 * m1))
    }

    /// Finite support with probabilities, when the law is discrete.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            ScalarLaw::Rademacher => Some(vec![(-1.0, 0.5), (1.0, 0.5)]),
            ScalarLaw::ThreePoint => Some(vec![(-SQRT3, 1.0 / 6.0), (0.0, 2.0 / 3.0), (SQRT3, 1.0 / 6.0)]),
            ScalarLaw::CenteredBernoulli { p } => {
                Some(vec![(-(p / (1.0 - p)).sqrt(), 1.0 - p), (((1.0 - p) / p).sqrt(), *p)])
            }
            _ => None,
        }
    }

    /// Quantile function.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            ScalarLaw::Uniform => SQRT3 * (2.0 * u - 1.0),
            ScalarLaw::QuantileTable { values } => {
                let k = values.len() - 1;
                let x = (u.clamp(0.0, 1.0)) * k as f64;
                let i = (x.floor() as usize).min(k - 1);
                let f = x - i as f64;
                values[i] * (1.0 - f) + values[i + 1] * f
            }
            _ => {
                let atoms = self.atoms().expect("discrete law");
                let mut acc = 0.0;
                for &(v, p) in &atoms {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                atoms[atoms.len() - 1].0
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// `E[X^2]`.
    pub fn variance(&self) -> f64 {
        match self {
            ScalarLaw::QuantileTable { .. } => self.table_moments().map(|m| m.1).unwrap_or(f64::NAN),
            _ => self.expect(|x| x * x),
        }
    }

    /// `τ_3 = E|X|^3`.
    pub fn abs_third_moment(&self) -> f64 {
        match self {
            ScalarLaw::Uniform => 3.0 * SQRT3 / 4.0,
            _ => self.expect(|x| x.abs().powi(3)),
        }
    }

    /// `E f(X)`; exact for discrete laws, Gauss-Legendre in the quantile
    /// variable otherwise.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        if let Some(atoms) = self.atoms() {
            return atoms.iter().map(|&(v, p)| p * f(v)).sum();
        }
        let pieces = match self {
            ScalarLaw::QuantileTable { values } => values.len() - 1,
            _ => 1,
        };
        let rule = crate::orthopoly::QuadratureRule::gegenbauer(3, 32).expect("legendre rule");
        let h = 1.0 / pieces as f64;
        let mut total = 0.0;
        for i in 0..pieces {
            let a = i as f64 * h;
            total += rule.integrate(|t| f(self.quantile(a + 0.5 * h * (t + 1.0)))) * h;
        }
        total
    }
}

/// One atom of a finitely supported radial law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialComponent {
    pub radius: f64,
    pub weight: f64,
}

/// Shape of the input law, independent of the dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionKind {
    Gaussian,
    /// Uniform on the sphere of the given radius, `√d` when omitted.
    UniformSphere {
        #[serde(default)]
        radius: Option<f64>,
    },
    /// Mixture of spheres. With `relative`, radii are in units of `√d`.
    RadialMixture {
        components: Vec<RadialComponent>,
        #[serde(default)]
        relative: bool,
    },
    Product {
        law: ScalarLaw,
    },
}

/// Input law `ν` on `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDistribution {
    pub dimension: usize,
    pub kind: DistributionKind,
}

impl InputDistribution {
    pub fn new(dimension: usize, kind: DistributionKind) -> Result<Self> {
        let dist = Self { dimension, kind };
        dist.validate()?;
        Ok(dist)
    }

    pub fn gaussian(dimension: usize) -> Self {
        Self {
            dimension,
            kind: DistributionKind::Gaussian,
        }
    }

    /// Uniform on `√d S^{d-1}`.
    pub fn sphere(dimension: usize) -> Self {
        Self {
            dimension,
            kind: DistributionKind::UniformSphere { radius: None },
        }
    }

    pub fn product(dimension: usize, law: ScalarLaw) -> Self {
        Self {
            dimension,
            kind: DistributionKind::Product { law },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension < 3 {
            return Err(Error::InvalidDimension(self.dimension));
        }
        match &self.kind {
            DistributionKind::UniformSphere { radius: Some(r) } if !(*r > 0.0) => Err(Error::InvalidDistribution(
                format!("sphere radius {r} must be positive"),
            )),
            DistributionKind::RadialMixture { components, .. } => {
                if components.is_empty() {
                    return Err(Error::InvalidDistribution("empty radial mixture".into()));
                }
                if components.iter().any(|c| c.weight < 0.0 || !(c.radius > 0.0)) {
                    return Err(Error::InvalidDistribution(
                        "mixture weights must be nonnegative and radii positive".into(),
                    ));
                }
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidDistribution(format!(
                        "mixture weights sum to {total}, expected 1"
                    )));
                }
                Ok(())
            }
            DistributionKind::Product { law } => law.validate(),
            _ => Ok(()),
        }
    }

    pub fn is_spherically_symmetric(&self) -> bool {
        !matches!(self.kind, DistributionKind::Product { .. })
    }

    /// Radius atoms `(r, weight)` for laws supported on finitely many spheres.
    pub fn radial_atoms(&self) -> Option<Vec<(f64, f64)>> {
        let sd = (self.dimension as f64).sqrt();
        match &self.kind {
            DistributionKind::UniformSphere { radius } => Some(vec![(radius.unwrap_or(sd), 1.0)]),
            DistributionKind::RadialMixture { components, relative } => {
                let s = if *relative { sd } else { 1.0 };
                Some(components.iter().map(|c| (c.radius * s, c.weight)).collect())
            }
            _ => None,
        }
    }

    fn pick_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let atoms = self.radial_atoms().expect("radial law");
        if atoms.len() == 1 {
            return atoms[0].0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(r, w) in &atoms {
            acc += w;
            if u < acc {
                return r;
            }
        }
        atoms[atoms.len() - 1].0
    }

    /// Draws one sample into `x` (length `d`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut [f64]) {
        match &self.kind {
            DistributionKind::Gaussian => fill_normal(rng, x),
            DistributionKind::Product { law } => {
                for v in x.iter_mut() {
                    *v = law.sample(rng);
                }
            }
            _ => {
                let r = self.pick_radius(rng);
                fill_normal(rng, x);
                scale_to_norm(x, r);
            }
        }
    }

    /// Draws a Gaussian `z` and a sample `x` of this law coupled to it:
    /// identity for the Gaussian, radial projection for spherical laws and a
    /// coordinatewise quantile transform for product laws.
    pub fn sample_coupled<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut [f64], z: &mut [f64]) {
        match &self.kind {
            DistributionKind::Gaussian => {
                fill_normal(rng, z);
                x.copy_from_slice(z);
            }
            DistributionKind::Product { law } => {
                fill_normal(rng, z);
                for (xi, zi) in x.iter_mut().zip(z.iter()) {
                    *xi = law.quantile(std_normal_cdf(*zi));
                }
            }
            _ => {
                let r = self.pick_radius(rng);
                fill_normal(rng, z);
                x.copy_from_slice(z);
                scale_to_norm(x, r);
            }
        }
    }

    /// `n` samples as rows of a matrix, deterministic in `seed`.
    pub fn sample(&self, seed: u64, n: usize) -> Array2<f64> {
        let mut rng = stream_rng(seed, 0);
        let mut out = Array2::zeros((n, self.dimension));
        let mut buf = vec![0.0; self.dimension];
        for mut row in out.rows_mut() {
            self.sample_into(&mut rng, &mut buf);
            row.assign(&ndarray::ArrayView1::from(&buf[..]));
        }
        out
    }
}

pub(crate) fn fill_normal<R: Rng + ?Sized>(rng: &mut R, x: &mut [f64]) {
    for v in x.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

fn scale_to_norm(x: &mut [f64], r: f64) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let s = r / n;
    for v in x.iter_mut() {
        *v *= s;
    }
}

/// Uniform point on `S^{d-1}`.
pub fn uniform_sphere_point<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    fill_normal(rng, &mut v);
    scale_to_norm(&mut v, 1.0);
    v
}

/// Density of one coordinate of a uniform point on `S^{d-1}`:
/// `u_d(t) = (1 - t^2)^{(d-3)/2} / B(1/2, (d-1)/2)` on `[-1, 1]`, zero outside.
pub fn marginal_density(d: usize, t: f64) -> f64 {
    if t.abs() > 1.0 {
        return 0.0;
    }
    let df = d as f64;
    if t.abs() == 1.0 {
        return if d == 3 { 0.5 } else { 0.0 };
    }
    ((df - 3.0) / 2.0 * (1.0 - t * t).ln() - ln_beta(0.5, (df - 1.0) / 2.0)).exp()
}

/// Distribution function of `u_d`.
pub fn marginal_cdf(d: usize, t: f64) -> f64 {
    if t <= -1.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let half = 0.5 * beta_reg(0.5, (d as f64 - 1.0) / 2.0, t * t);
    if t >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// Monte-Carlo tail of the initial correlation with the analytic bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailProbability {
    pub dimension: usize,
    pub a: f64,
    pub samples: usize,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `P(m_0 >= a/√d)` from the regularized incomplete Beta function.
    pub exact: f64,
    /// `a^{-1} e^{-a^2/4}`.
    pub upper_bound: f64,
    /// `(2a)^{-1} e^{-a^2/4}`.
    pub upper_bound_sharp: f64,
    /// `(δ/4) e^{-(a+δ)^2}` when `max(a, δ) <= √d/4`.
    pub lower_bound: Option<f64>,
}

/// Estimates `P(θ_0·θ* >= a/√d)` for `θ_0` uniform on `S^{d-1}` with `n`
/// samples. The correlation is drawn exactly as `z_1/sqrt(z_1^2 + χ²_{d-1})`.
/// The interval is the normal approximation with critical value `z_crit`.
pub fn init_tail_probability(
    d: usize,
    a: f64,
    delta: f64,
    n: usize,
    seed: u64,
    z_crit: f64,
) -> Result<TailProbability> {
    if d < 3 {
        return Err(Error::InvalidDimension(d));
    }
    if a < 0.0 || delta <= 0.0 || n == 0 {
        return Err(Error::InvalidParameter("need a >= 0, delta > 0, n >= 1".into()));
    }
    let df = d as f64;
    let s = a / df.sqrt();
    let chi = ChiSquared::new(df - 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = stream_rng(seed, 0);
    let mut hits = 0usize;
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        let c: f64 = chi.sample(&mut rng);
        if z / (z * z + c).sqrt() >= s {
            hits += 1;
        }
    }
    let p = hits as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    let g = (-a * a / 4.0).exp();
    let lower_bound = (a.max(delta) <= df.sqrt() / 4.0).then(|| delta / 4.0 * (-(a + delta).powi(2)).exp());
    Ok(TailProbability {
        dimension: d,
        a,
        samples: n,
        estimate: p,
        ci_low: p - z_crit * se,
        ci_high: p + z_crit * se,
        exact: 1.0 - marginal_cdf(d, s),
        upper_bound: if a > 0.0 { g / a } else { f64::INFINITY },
        upper_bound_sharp: if a > 0.0 { g / (2.0 * a) } else { f64::INFINITY },
        lower_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orthopoly::QuadratureRule;

    #[test]
    fn gaussian_covariance() {
        let x = InputDistribution::gaussian(4).sample(11, 100_000);
        let n = x.nrows() as f64;
        let cov = x.t().dot(&x) / n;
        for i in 0..4 {
            for j in 0..4 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((cov[[i, j]] - target).abs() < 0.02);
            }
        }
    }

    #[test]
    fn sphere_norms_exact() {
        let x = InputDistribution::sphere(50).sample(3, 200);
        for row in x.rows() {
            let n = row.dot(&row).sqrt();
            assert!((n - 50f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn product_uniform_variance_and_third_moment() {
        let x = InputDistribution::product(10, ScalarLaw::Uniform).sample(5, 100_000);
        for col in x.columns() {
            let v = col.mapv(|t| t * t).mean().unwrap();
            assert!((v - 1.0).abs() < 0.02);
        }
        let t3 = x.column(0).mapv(|t| t.abs().powi(3)).mean().unwrap();
        let exact = ScalarLaw::Uniform.abs_third_moment();
        assert!((exact - 3.0 * 3f64.sqrt() / 4.0).abs() < 1e-15);
        assert!(((t3 - exact) / exact).abs() < 0.01);
    }

    #[test]
    fn scalar_law_moments() {
        let laws = [
            ScalarLaw::Uniform,
            ScalarLaw::Rademacher,
            ScalarLaw::ThreePoint,
            ScalarLaw::CenteredBernoulli { p: 0.3 },
        ];
        for law in &laws {
            assert!(law.expect(|x| x).abs() < 1e-14);
            assert!((law.variance() - 1.0).abs() < 1e-13);
        }
        assert!((ScalarLaw::ThreePoint.abs_third_moment() - 3f64.sqrt()).abs() < 1e-14);
        assert!((ScalarLaw::Rademacher.abs_third_moment() - 1.0).abs() < 1e-15);
        let p: f64 = 0.3;
        let t3 = p * ((1.0 - p) / p).powf(1.5) + (1.0 - p) * (p / (1.0 - p)).powf(1.5);
        assert!((ScalarLaw::CenteredBernoulli { p }.abs_third_moment() - t3).abs() < 1e-14);
    }

    #[test]
    fn quantile_table_standardization() {
        let raw: Vec<f64> = (0..=20).map(|i| (i as f64 / 20.0).powi(2)).collect();
        assert!(ScalarLaw::QuantileTable { values: raw.clone() }.validate().is_err());
        let law = ScalarLaw::standardized_table(raw).unwrap();
        law.validate().unwrap();
        assert!(law.expect(|x| x).abs() < 1e-12);
        assert!((law.expect(|x| x * x) - 1.0).abs() < 1e-12);
        assert!(ScalarLaw::standardized_table(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn mixture_validation() {
        let bad = DistributionKind::RadialMixture {
            components: vec![
                RadialComponent {
                    radius: 1.0,
                    weight: 0.7,
                },
                RadialComponent {
                    radius: 2.0,
                    weight: 0.2,
                },
            ],
            relative: true,
        };
        assert!(InputDistribution::new(10, bad).is_err());
        let neg = DistributionKind::RadialMixture {
            components: vec![
                RadialComponent {
                    radius: 1.0,
                    weight: 1.5,
                },
                RadialComponent {
                    radius: 2.0,
                    weight: -0.5,
                },
            ],
            relative: false,
        };
        assert!(InputDistribution::new(10, neg).is_err());
        assert!(InputDistribution::new(2, DistributionKind::Gaussian).is_err());
    }

    #[test]
    fn seeded_determinism() {
        let d = InputDistribution::product(7, ScalarLaw::ThreePoint);
        assert_eq!(d.sample(9, 50), d.sample(9, 50));
        assert_ne!(d.sample(9, 50), d.sample(10, 50));
    }

    #[test]
    fn coupled_sampling_matches_marginals() {
        let dist = InputDistribution::product(3, ScalarLaw::Rademacher);
        let mut rng = stream_rng(1, 2);
        let (mut x, mut z) = (vec![0.0; 3], vec![0.0; 3]);
        for _ in 0..100 {
            dist.sample_coupled(&mut rng, &mut x, &mut z);
            for (xi, zi) in x.iter().zip(&z) {
                assert_eq!(*xi, if *zi < 0.0 { -1.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn marginal_density_values() {
        for &t in &[-0.9, 0.0, 0.3, 1.0] {
            assert!((marginal_density(3, t) - 0.5).abs() < 1e-14);
        }
        assert_eq!(marginal_density(10, 1.0), 0.0);
        assert_eq!(marginal_density(10, -1.0), 0.0);
        assert_eq!(marginal_density(10, 1.2), 0.0);
        for d in [4usize, 10, 50, 300] {
            // Gauss-Legendre on the density itself.
            let rule = QuadratureRule::gegenbauer(3, 200).unwrap();
            let mass = 2.0 * rule.integrate(|t| marginal_density(d, t));
            let m2 = 2.0 * rule.integrate(|t| t * t * marginal_density(d, t));
            let tol = if d == 4 { 1e-5 } else { 1e-10 };
            assert!((mass - 1.0).abs() < tol, "d={d} mass={mass}");
            assert!((m2 - 1.0 / d as f64).abs() < tol);
            assert_eq!(marginal_density(d, 0.2), marginal_density(d, -0.2));
        }
    }

    #[test]
    fn first_coordinate_passes_ks() {
        let d = 20;
        let n = 100_000;
        let x = InputDistribution::sphere(d).sample(77, n);
        let r = (d as f64).sqrt();
        let mut t: Vec<f64> = x.column(0).iter().map(|v| v / r).collect();
        t.sort_by(f64::total_cmp);
        let mut dmax: f64 = 0.0;
        for (i, &v) in t.iter().enumerate() {
            let f = marginal_cdf(d, v);
            dmax = dmax
                .max((f - i as f64 / n as f64).abs())
                .max(((i + 1) as f64 / n as f64 - f).abs());
        }
        // Kolmogorov critical value at significance 0.01.
        assert!(dmax < 1.628 / (n as f64).sqrt(), "ks={dmax}");
    }

    #[test]
    fn tail_examples() {
        let t0 = init_tail_probability(100, 0.0, 1.0, 200_000, 4, 3.0).unwrap();
        assert!((t0.estimate - 0.5).abs() < 3.0 * 0.5 / (200_000f64).sqrt() * 1.5);
        assert!((t0.exact - 0.5).abs() < 1e-14);
        let t2 = init_tail_probability(100, 2.0, 1.0, 200_000, 5, 3.0).unwrap();
        assert!((t2.upper_bound - 0.5 * (-1f64).exp()).abs() < 1e-15);
        assert!((t2.upper_bound_sharp - 0.25 * (-1f64).exp()).abs() < 1e-15);
        assert!(t2.ci_low <= t2.upper_bound_sharp);
        assert!(t2.ci_low <= t2.exact && t2.exact <= t2.ci_high);
        let t1 = init_tail_probability(64, 1.0, 1.0, 100_000, 6, 3.0).unwrap();
        let lb = t1.lower_bound.unwrap();
        assert!((lb - 0.25 * (-4f64).exp()).abs() < 1e-15);
        assert!(t1.ci_high >= lb);
        assert!(init_tail_probability(16, 2.0, 1.0, 10, 1, 3.0)
            .unwrap()
            .lower_bound
            .is_none());
    }
}
