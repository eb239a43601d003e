use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use super::quadrature::QuadratureRule;
use super::tridiag::eigen_first_row;
use crate::error::{Error, Result};

/// Coefficients of `P_{j+1}(t) = (a t + b) P_j(t) - c P_{j-1}(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecurrenceTriple {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Recurrence triple for degree `j` in dimension `d` (real so that `d + 2`
/// shifts stay cheap), normalized so every polynomial equals 1 at `t = 1`.
pub(crate) fn triple(d: f64, j: usize) -> RecurrenceTriple {
    let j = j as f64;
    let den = j + d - 2.0;
    RecurrenceTriple {
        a: (2.0 * j + d - 2.0) / den,
        b: 0.0,
        c: j / den,
    }
}

/// Unchecked evaluation of `P_{j,d}(t)`; valid for any real `t`.
pub(crate) fn eval_raw(d: f64, j: usize, t: f64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, t);
    for k in 1..j {
        let r = triple(d, k);
        let next = r.a * t * cur - r.c * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[k] = P_{k,d}(t)` for `k < out.len()`.
pub(crate) fn eval_all_raw(d: f64, t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = t;
    }
    for k in 1..out.len().saturating_sub(1) {
        let r = triple(d, k);
        out[k + 1] = r.a * t * out[k] - r.c * out[k - 1];
    }
}

/// Unchecked derivative through the dimension-shift identity.
pub(crate) fn derivative_raw(d: f64, j: usize, t: f64) -> f64 {
    if j == 0 {
        return 0.0;
    }
    let jf = j as f64;
    jf * (jf + d - 2.0) / (d - 1.0) * eval_raw(d + 2.0, j - 1, t)
}

/// Squared off-diagonal of the monic Jacobi matrix, coupling degrees `k-1`, `k`.
pub(crate) fn jacobi_offdiag_sq(d: f64, k: usize) -> f64 {
    let k = k as f64;
    k * (k + d - 3.0) / ((2.0 * k + d - 2.0) * (2.0 * k + d - 4.0))
}

/// Largest root of `P_{j,d}` through the Jacobi matrix (no polishing).
fn jacobi_roots(d: f64, j: usize) -> Result<Vec<f64>> {
    let diag = vec![0.0; j];
    let off: Vec<f64> = (1..j).map(|k| jacobi_offdiag_sq(d, k).sqrt()).collect();
    Ok(eigen_first_row(&diag, &off)?.0)
}

/// Natural log of the spherical-harmonic dimension
/// `N(j,d) = (2j+d-2)/j * C(j+d-3, j-1)`.
pub fn ln_harmonic_dimension(j: usize, d: usize) -> f64 {
    if j == 0 {
        return 0.0;
    }
    let (jf, df) = (j as f64, d as f64);
    ((2.0 * jf + df - 2.0) / jf).ln() + ln_gamma(jf + df - 2.0) - ln_gamma(jf) - ln_gamma(df - 1.0)
}

/// Number of linearly independent degree-`j` spherical harmonics on `S^{d-1}`.
pub fn harmonic_dimension(j: usize, d: usize) -> f64 {
    ln_harmonic_dimension(j, d).exp()
}

/// Bracket for the largest root of `P_{j,d}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootBracket {
    /// Lower bound on `z`, from the lower bound on `z^2`.
    pub lower: f64,
    /// Upper bound on `z`.
    pub upper: f64,
    /// Two-sided bound on the squared largest root, when available (`j >= 3`).
    pub squared_two_sided: Option<(f64, f64)>,
}

/// Roots and extremal data of one Gegenbauer polynomial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootReport {
    pub degree: usize,
    pub dimension: usize,
    /// All roots in ascending order.
    pub roots: Vec<f64>,
    /// `|P_{j,d}(root)|` for each root.
    pub residuals: Vec<f64>,
    /// Largest root `z_{j,d}`.
    pub largest: f64,
    pub bracket: RootBracket,
    /// Depth of the deepest negative dip on `(0, 1)`.
    pub upsilon: f64,
    /// Location of that dip, the largest root of `P_{j-1,d+2}`.
    pub upsilon_location: f64,
}

impl RootReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn bracket_holds(&self, tol: f64) -> bool {
        self.largest >= self.bracket.lower - tol && self.largest <= self.bracket.upper + tol
    }
}

/// Gegenbauer polynomials `P_{j,d}` in the `P(1) = 1` normalization, orthogonal
/// under `u_d(dt) ∝ (1 - t^2)^{(d-3)/2} dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct GegenbauerBasis {
    dimension: usize,
    max_degree: usize,
    recurrence: Vec<RecurrenceTriple>,
}

impl GegenbauerBasis {
    pub fn new(dimension: usize, max_degree: usize) -> Result<Self> {
        if dimension < 3 {
            return Err(Error::InvalidDimension(dimension));
        }
        let d = dimension as f64;
        let recurrence = (0..max_degree.max(1)).map(|j| triple(d, j)).collect();
        Ok(Self {
            dimension,
            max_degree,
            recurrence,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// `lambda = d/2 - 1`.
    pub fn lambda(&self) -> f64 {
        self.dimension as f64 / 2.0 - 1.0
    }

    /// Recurrence triples; entry `j` maps `(P_{j-1}, P_j)` to `P_{j+1}`.
    pub fn recurrence(&self) -> &[RecurrenceTriple] {
        &self.recurrence
    }

    fn d(&self) -> f64 {
        self.dimension as f64
    }

    fn check_degree(&self, j: usize) -> Result<()> {
        if j > self.max_degree {
            return Err(Error::DegreeOutOfRange {
                degree: j,
                max: self.max_degree,
            });
        }
        Ok(())
    }

    fn check_domain(t: f64) -> Result<()> {
        if !(-1.0..=1.0).contains(&t) {
            return Err(Error::Domain {
                value: t,
                domain: "[-1, 1]",
            });
        }
        Ok(())
    }

    pub fn eval(&self, j: usize, t: f64) -> Result<f64> {
        self.check_degree(j)?;
        Self::check_domain(t)?;
        Ok(eval_raw(self.d(), j, t))
    }

    /// `P_{0..=J,d}(t)`.
    pub fn eval_all(&self, t: f64) -> Result<Vec<f64>> {
        Self::check_domain(t)?;
        let mut out = vec![0.0; self.max_degree + 1];
        eval_all_raw(self.d(), t, &mut out);
        Ok(out)
    }

    /// `P'_{j,d}(t) = j(j+d-2)/(d-1) P_{j-1,d+2}(t)`; zero for `j = 0`.
    pub fn derivative(&self, j: usize, t: f64) -> Result<f64> {
        self.check_degree(j)?;
        Self::check_domain(t)?;
        Ok(derivative_raw(self.d(), j, t))
    }

    /// `<P_j, P_j>` under the probability measure `u_d`, equal to `1/N(j,d)`.
    pub fn norm_sq(&self, j: usize) -> Result<f64> {
        self.check_degree(j)?;
        Ok((-ln_harmonic_dimension(j, self.dimension)).exp())
    }

    /// Gauss rule for `u_d` with `n` nodes.
    pub fn quadrature(&self, n: usize) -> Result<QuadratureRule> {
        QuadratureRule::gegenbauer(self.dimension, n)
    }

    /// All roots, polished by one guarded Newton step, with certified bracket.
    pub fn roots(&self, j: usize) -> Result<RootReport> {
        if j < 2 {
            return Err(Error::InvalidParameter(format!(
                "root report needs degree >= 2, got {j}"
            )));
        }
        self.check_degree(j)?;
        let d = self.d();
        let mut roots = jacobi_roots(d, j)?;
        for k in 0..roots.len() {
            let x = roots[k];
            let p = eval_raw(d, j, x);
            let dp = derivative_raw(d, j, x);
            if dp != 0.0 {
                let y = x - p / dp;
                let lo = if k > 0 { roots[k - 1] } else { -1.0 };
                let hi = if k + 1 < roots.len() { roots[k + 1] } else { 1.0 };
                if y > lo && y < hi && eval_raw(d, j, y).abs() <= p.abs() {
                    roots[k] = y;
                }
            }
        }
        // Exact symmetry about the origin.
        for k in 0..j / 2 {
            let s = 0.5 * (roots[j - 1 - k] - roots[k]);
            roots[k] = -s;
            roots[j - 1 - k] = s;
        }
        if j % 2 == 1 {
            roots[j / 2] = 0.0;
        }
        let residuals = roots.iter().map(|&z| eval_raw(d, j, z).abs()).collect();
        let largest = roots[j - 1];
        let (upsilon, upsilon_location) = upsilon_raw(d, j)?;
        Ok(RootReport {
            degree: j,
            dimension: self.dimension,
            roots,
            residuals,
            largest,
            bracket: root_bracket(self.dimension, j),
            upsilon,
            upsilon_location,
        })
    }

    /// Largest root `z_{j,d}`.
    pub fn largest_root(&self, j: usize) -> Result<f64> {
        Ok(self.roots(j)?.largest)
    }

    /// `υ_{j,d} = -min_{t in (0,1)} P_{j,d}(t)`, attained at the largest root of
    /// `P_{j-1,d+2}`.
    pub fn upsilon(&self, j: usize) -> Result<f64> {
        if j < 2 {
            return Err(Error::InvalidParameter(format!("upsilon needs degree >= 2, got {j}")));
        }
        self.check_degree(j)?;
        Ok(upsilon_raw(self.d(), j)?.0)
    }

    /// Whether `P_{j,d}(t) >= (t - z_{j,d})^j` at `t`, for `t >= z_{j,d}`.
    pub fn taylor_lower_bound_holds(&self, j: usize, t: f64) -> Result<bool> {
        Self::check_domain(t)?;
        let z = self.largest_root(j)?;
        if t < z {
            return Err(Error::Domain {
                value: t,
                domain: "[largest root, 1]",
            });
        }
        let p = eval_raw(self.d(), j, t);
        Ok(p >= (t - z).powi(j as i32) - 1e-14)
    }

    /// `Σ_j coeffs[j] P_{j,d}(t)` by Clenshaw summation.
    pub fn clenshaw(&self, coeffs: &[f64], t: f64) -> f64 {
        clenshaw_raw(self.d(), coeffs, t)
    }
}

/// Clenshaw summation of a Gegenbauer series in dimension `d`.
pub(crate) fn clenshaw_raw(d: f64, coeffs: &[f64], t: f64) -> f64 {
    let n = coeffs.len();
    match n {
        0 => return 0.0,
        1 => return coeffs[0],
        _ => {}
    }
    let (mut b1, mut b2) = (0.0, 0.0);
    for k in (1..n).rev() {
        let alpha = triple(d, k).a * t;
        let beta_next = triple(d, k + 1).c;
        let b0 = coeffs[k] + alpha * b1 - beta_next * b2;
        b2 = b1;
        b1 = b0;
    }
    coeffs[0] + t * b1 - triple(d, 1).c * b2
}

fn upsilon_raw(d: f64, j: usize) -> Result<(f64, f64)> {
    let loc = if j == 2 {
        0.0
    } else {
        let roots = jacobi_roots(d + 2.0, j - 1)?;
        let mut x = roots[j - 2];
        let p = eval_raw(d + 2.0, j - 1, x);
        let dp = derivative_raw(d + 2.0, j - 1, x);
        if dp != 0.0 {
            let y = x - p / dp;
            if (y - x).abs() < 1e-6 && eval_raw(d + 2.0, j - 1, y).abs() <= p.abs() {
                x = y;
            }
        }
        x
    };
    Ok(((-eval_raw(d, j, loc)).max(0.0), loc))
}

/// Bracket for the largest root from the classical bounds: the upper bound
/// `sqrt((j-1)(j+d-4)/((j+d/2-3)(j+d/2-2))) cos(pi/(j+1))`, the lower bound
/// `z^2 >= 1 - (2λ+1)(2λ+3)/((j-1)(j+2λ+1) + (2λ+1)(2λ+3))` and the two-sided
/// bound on `z^2` valid for `j >= 3`.
pub fn root_bracket(d: usize, j: usize) -> RootBracket {
    let (jf, df) = (j as f64, d as f64);
    let lambda = df / 2.0 - 1.0;
    let upper = ((jf - 1.0) * (jf + df - 4.0) / ((jf + df / 2.0 - 3.0) * (jf + df / 2.0 - 2.0))).sqrt()
        * (std::f64::consts::PI / (jf + 1.0)).cos();
    let q = (2.0 * lambda + 1.0) * (2.0 * lambda + 3.0);
    let lower_sq = 1.0 - q / ((jf - 1.0) * (jf + 2.0 * lambda + 1.0) + q);
    let squared_two_sided = (j >= 3).then(|| two_sided_squared(jf, lambda));
    RootBracket {
        lower: lower_sq.max(0.0).sqrt(),
        upper,
        squared_two_sided,
    }
}

/// Interval `[(b - (j-2)√c)/a, (b + (j-2)√c)/a]` for squared extreme roots.
fn two_sided_squared(j: f64, lambda: f64) -> (f64, f64) {
    let b = j.powi(3) + 2.0 * (lambda - 1.0) * j * j - (3.0 * lambda - 5.0) * j + 4.0 * (lambda - 1.0);
    let a = 2.0 * (j + lambda - 1.0) * (j * j + j * (lambda - 1.0) + 4.0 * (lambda + 1.0));
    let c = (j * (j + 2.0 * lambda)).powi(2)
        + (2.0 * lambda + 1.0) * (j * j + 2.0 * (lambda + 3.0) * j + 8.0 * (lambda - 1.0));
    let s = (j - 2.0) * c.max(0.0).sqrt();
    ((b - s) / a, (b + s) / a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(d: usize, j: usize) -> GegenbauerBasis {
        GegenbauerBasis::new(d, j).unwrap()
    }

    #[test]
    fn low_degree_closed_forms() {
        let b = basis(50, 8);
        assert_eq!(b.eval(0, 0.3).unwrap(), 1.0);
        assert_eq!(b.eval(1, 0.3).unwrap(), 0.3);
        for d in [3usize, 4, 7, 50, 300] {
            let b = basis(d, 4);
            let df = d as f64;
            for &t in &[-1.0, -0.4, 0.0, 0.35, 1.0] {
                let p2 = (df * t * t - 1.0) / (df - 1.0);
                let p3 = t * ((df + 2.0) * t * t - 3.0) / (df - 1.0);
                assert!((b.eval(2, t).unwrap() - p2).abs() < 1e-15);
                assert!((b.eval(3, t).unwrap() - p3).abs() < 1e-15);
            }
            assert!((b.eval(3, 1.0).unwrap() - 1.0).abs() < 1e-15);
            assert!((b.eval(3, -1.0).unwrap() + 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn extended_precision_references() {
        // Reference values from 40-digit arithmetic.
        let cases = [
            (10, 7, 0.3, 0.010739203719140625),
            (64, 512, 0.77, 2.7210673540899742341e-9),
            (30, 4, -0.91, 0.049315215735439164315),
            (64, 3, 0.123, -0.0099461000215316593603),
            (25, 200, 0.05, -9.5056983569175476236e-18),
            (40, 50, 0.999, 0.93055604145371564164),
        ];
        for (j, d, t, r) in cases {
            let v = basis(d, 64).eval(j, t).unwrap();
            assert!(((v - r) / r).abs() < 1e-10, "j={j} d={d} v={v} r={r}");
        }
    }

    #[test]
    fn errors() {
        let b = basis(10, 5);
        assert!(matches!(b.eval(6, 0.1), Err(Error::DegreeOutOfRange { .. })));
        assert!(matches!(b.eval(2, 1.5), Err(Error::Domain { .. })));
        assert!(matches!(GegenbauerBasis::new(2, 5), Err(Error::InvalidDimension(2))));
        assert!(b.roots(1).is_err());
    }

    #[test]
    fn unit_at_one_and_bounded() {
        for d in [3, 4, 10, 50, 200, 512] {
            let b = basis(d, 64);
            let all = b.eval_all(1.0).unwrap();
            assert!(all.iter().all(|v| (v - 1.0).abs() < 1e-12));
            for i in 0..=400 {
                let t = -1.0 + i as f64 / 200.0;
                for v in b.eval_all(t).unwrap() {
                    assert!(v.abs() <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn derivative_examples() {
        let b = basis(50, 4);
        assert_eq!(b.derivative(0, 0.2).unwrap(), 0.0);
        assert!((b.derivative(1, 0.77).unwrap() - 1.0).abs() < 1e-15);
        assert!((b.derivative(2, 0.5).unwrap() - 100.0 / 49.0 * 0.5).abs() < 1e-14);
        assert_eq!(b.derivative(4, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for d in [3, 6, 50, 120] {
            let b = basis(d, 12);
            for j in 1..=12 {
                for i in 1..40 {
                    let t = -0.98 + i as f64 * 0.049;
                    let e = 1e-6;
                    let fd = (b.eval(j, t + e).unwrap() - b.eval(j, t - e).unwrap()) / (2.0 * e);
                    let an = b.derivative(j, t).unwrap();
                    assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "d={d} j={j} t={t}");
                }
            }
        }
    }

    #[test]
    fn clenshaw_matches_direct_sum() {
        let b = basis(37, 20);
        let coeffs: Vec<f64> = (0..=20).map(|k| 1.0 / (1.0 + k as f64)).collect();
        for &t in &[-0.9, -0.1, 0.0, 0.44, 1.0] {
            let direct: f64 = b.eval_all(t).unwrap().iter().zip(&coeffs).map(|(p, c)| p * c).sum();
            assert!((b.clenshaw(&coeffs, t) - direct).abs() < 1e-13);
        }
        assert_eq!(b.clenshaw(&[], 0.3), 0.0);
        assert_eq!(b.clenshaw(&[2.5], 0.3), 2.5);
        assert!((b.clenshaw(&[0.0, 3.0], 0.3) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn largest_root_references() {
        let refs = [
            (4, 50, 0.31698295958954428156),
            (4, 75, 0.26225728948159227419),
            (4, 100, 0.22865520030811003813),
            (10, 20, 0.76590240253808678882),
            (7, 11, 0.78131553854560644817),
        ];
        for (j, d, z) in refs {
            let r = basis(d, j).roots(j).unwrap();
            assert!((r.largest - z).abs() < 1e-13, "j={j} d={d}");
            assert!(r.max_residual() <= 1e-10);
        }
    }

    #[test]
    fn quadratic_and_cubic_roots() {
        for d in [3, 9, 50, 400] {
            let r = basis(d, 3).roots(2).unwrap();
            let z = 1.0 / (d as f64).sqrt();
            assert!((r.roots[0] + z).abs() < 1e-15 && (r.roots[1] - z).abs() < 1e-15);
            let r3 = basis(d, 3).roots(3).unwrap();
            assert_eq!(r3.roots[1], 0.0);
        }
    }

    #[test]
    fn interlacing_with_derivative_roots() {
        for d in [4, 13, 80] {
            for j in 3..=25 {
                let r = basis(d, j).roots(j).unwrap().roots;
                let q = basis(d + 2, j).roots(j - 1).unwrap().roots;
                for k in 0..j - 1 {
                    assert!(r[k] < q[k] && q[k] < r[k + 1], "d={d} j={j} k={k}");
                }
            }
        }
    }

    #[test]
    fn upsilon_closed_forms_and_grid() {
        for d in [5usize, 20, 100, 400] {
            let df = d as f64;
            let b = basis(d, 12);
            assert!((b.upsilon(2).unwrap() - 1.0 / (df - 1.0)).abs() < 1e-15);
            let u3 = 2.0 / ((df - 1.0) * (df + 2.0).sqrt());
            assert!(((b.upsilon(3).unwrap() - u3) / u3).abs() < 1e-12);
        }
        // Dense-grid minimization as an independent check.
        for (j, d) in [(5, 10), (8, 30), (12, 60)] {
            let b = basis(d, j);
            let n = 1_000_000;
            let grid_min = (1..n)
                .map(|i| eval_raw(d as f64, j, i as f64 / n as f64))
                .fold(f64::INFINITY, f64::min);
            assert!((b.upsilon(j).unwrap() + grid_min).abs() < 1e-8, "j={j} d={d}");
        }
    }

    #[test]
    fn taylor_lower_bound() {
        let b = basis(50, 4);
        assert!(b.taylor_lower_bound_holds(4, 1.0).unwrap());
        let z2 = 1.0 / 50f64.sqrt();
        assert!(b.taylor_lower_bound_holds(2, z2 + 0.1).unwrap());
        assert!(b.taylor_lower_bound_holds(4, 0.1).is_err());
        let b6 = basis(30, 6);
        let z = b6.largest_root(6).unwrap();
        for i in 0..200 {
            let t = z + (1.0 - z) * i as f64 / 199.0;
            assert!(b6.taylor_lower_bound_holds(6, t.min(1.0)).unwrap());
        }
    }

    #[test]
    fn harmonic_dimension_small_cases() {
        for d in [3usize, 4, 9, 50] {
            let df = d as f64;
            assert!((harmonic_dimension(0, d) - 1.0).abs() < 1e-12);
            assert!((harmonic_dimension(1, d) - df).abs() < 1e-9);
            assert!((harmonic_dimension(2, d) - (df + 2.0) * (df - 1.0) / 2.0).abs() < 1e-8);
        }
        assert!((harmonic_dimension(5, 3) - 11.0).abs() < 1e-10);
    }
}
