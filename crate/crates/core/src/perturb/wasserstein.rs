use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{fill_normal, stream_rng, InputDistribution};

/// Largest sample size solved by exact assignment.
pub const EXACT_ASSIGNMENT_MAX: usize = 2000;
/// Directions used by the sliced surrogate.
pub const SLICED_DIRECTIONS: usize = 256;

/// Minimum-cost perfect matching on a dense `n × n` cost matrix (row-major).
/// Returns `assignment[row] = column`.
pub fn min_cost_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    // Shortest augmenting paths with row/column potentials, 1-based.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

/// Exact `W_1` between two equal-size planar empirical measures.
pub fn empirical_w1_exact(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let n = a.len();
    let mut cost = vec![0.0; n * n];
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            cost[i * n + j] = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        }
    }
    let asg = min_cost_assignment(&cost, n);
    asg.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>() / n as f64
}

/// One-dimensional `W_1` between equal-size samples.
pub fn w1_sorted(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Sliced `W_1` averaged over `directions` equispaced angles in `[0, π)`.
/// It never exceeds the planar `W_1`.
pub fn empirical_w1_sliced(a: &[[f64; 2]], b: &[[f64; 2]], directions: usize) -> f64 {
    let mut pa = vec![0.0; a.len()];
    let mut pb = vec![0.0; b.len()];
    let mut total = 0.0;
    for k in 0..directions {
        let ang = std::f64::consts::PI * k as f64 / directions as f64;
        let (s, c) = ang.sin_cos();
        for (t, p) in pa.iter_mut().zip(a) {
            *t = c * p[0] + s * p[1];
        }
        for (t, p) in pb.iter_mut().zip(b) {
            *t = c * p[0] + s * p[1];
        }
        total += w1_sorted(&mut pa, &mut pb);
    }
    total / directions as f64
}

/// A 2-plane spanned by orthonormal `e1, e2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plane {
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub coordinate: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct W1Estimate {
    /// Largest per-plane estimate; a lower-bound estimator of the
    /// Grassmannian supremum.
    pub value: f64,
    pub best_plane: Plane,
    /// Estimate on each plane in evaluation order.
    pub per_plane: Vec<f64>,
    pub exact_assignment: bool,
    pub samples: usize,
}

impl W1Estimate {
    /// Running maximum over the first `k` planes.
    pub fn running_max(&self) -> Vec<f64> {
        self.per_plane
            .iter()
            .scan(0.0f64, |m, &v| {
                *m = m.max(v);
                Some(*m)
            })
            .collect()
    }
}

/// Plane `k` of the deterministic search sequence: coordinate pairs
/// `(0,1), (0,2), …` first, then uniformly random planes.
pub fn search_plane(d: usize, k: usize, coordinate_planes: usize, seed: u64) -> Plane {
    if k < coordinate_planes {
        let (i, j) = coordinate_pair(d, k);
        let mut e1 = vec![0.0; d];
        let mut e2 = vec![0.0; d];
        e1[i] = 1.0;
        e2[j] = 1.0;
        return Plane {
            e1,
            e2,
            coordinate: Some((i, j)),
        };
    }
    let mut rng = stream_rng(seed, 1 << 32 | k as u64);
    let mut e1 = vec![0.0; d];
    let mut e2 = vec![0.0; d];
    fill_normal(&mut rng, &mut e1);
    fill_normal(&mut rng, &mut e2);
    let n1 = e1.iter().map(|x| x * x).sum::<f64>().sqrt();
    e1.iter_mut().for_each(|x| *x /= n1);
    let p: f64 = e1.iter().zip(&e2).map(|(a, b)| a * b).sum();
    e2.iter_mut().zip(&e1).for_each(|(b, a)| *b -= p * a);
    let n2 = e2.iter().map(|x| x * x).sum::<f64>().sqrt();
    e2.iter_mut().for_each(|x| *x /= n2);
    Plane {
        e1,
        e2,
        coordinate: None,
    }
}

fn coordinate_pair(d: usize, k: usize) -> (usize, usize) {
    let pairs = d * (d - 1) / 2;
    let mut k = k % pairs;
    for i in 0..d {
        let row = d - 1 - i;
        if k < row {
            return (i, i + 1 + k);
        }
        k -= row;
    }
    (0, 1)
}

/// Projected `W_1` between `dist` and the standard Gaussian over a sequence
/// of planes. Both clouds are drawn from the same normals through
/// `sample_coupled`, so the estimate vanishes for the Gaussian itself.
/// Exact assignment up to `EXACT_ASSIGNMENT_MAX` samples, sliced above.
pub fn projected_w1_estimate(
    dist: &InputDistribution,
    coordinate_planes: usize,
    random_planes: usize,
    samples: usize,
    seed: u64,
) -> Result<W1Estimate> {
    dist.validate()?;
    let d = dist.dimension;
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let total = coordinate_planes + random_planes;
    if total == 0 || samples == 0 {
        return Err(Error::InvalidParameter("need at least one plane and one sample".into()));
    }
    let exact = samples <= EXACT_ASSIGNMENT_MAX;
    let per_plane: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|k| {
            let plane = search_plane(d, k, coordinate_planes, seed);
            let mut rng = stream_rng(seed, k as u64);
            let mut x = vec![0.0; d];
            let mut z = vec![0.0; d];
            let proj = |v: &[f64]| {
                [
                    v.iter().zip(&plane.e1).map(|(p, q)| p * q).sum::<f64>(),
                    v.iter().zip(&plane.e2).map(|(p, q)| p * q).sum::<f64>(),
                ]
            };
            let mut a = Vec::with_capacity(samples);
            let mut b = Vec::with_capacity(samples);
            for _ in 0..samples {
                dist.sample_coupled(&mut rng, &mut x, &mut z);
                a.push(proj(&x));
                b.push(proj(&z));
            }
            if exact {
                empirical_w1_exact(&a, &b)
            } else {
                empirical_w1_sliced(&a, &b, SLICED_DIRECTIONS)
            }
        })
        .collect();
    let best = per_plane
        .iter()
        .enumerate()
        .fold((f64::NEG_INFINITY, 0), |b, (k, &w)| if w > b.0 { (w, k) } else { b });
    Ok(W1Estimate {
        value: best.0,
        best_plane: search_plane(d, best.1, coordinate_planes, seed),
        per_plane,
        exact_assignment: exact,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::ScalarLaw;

    #[test]
    fn assignment_small_case() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let a = min_cost_assignment(&cost, 3);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i * 3 + j]).sum();
        assert_eq!(total, 5.0);
        assert_eq!(a, vec![1, 0, 2]);
    }

    #[test]
    fn assignment_matches_brute_force() {
        let mut rng = stream_rng(3, 0);
        for n in 2..=6 {
            let mut cost = vec![0.0; n * n];
            fill_normal(&mut rng, &mut cost);
            let a = min_cost_assignment(&cost, n);
            let got: f64 = a.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
            let mut perm: Vec<usize> = (0..n).collect();
            let mut best = f64::INFINITY;
            permute(&mut perm, 0, &mut |p| {
                best = best.min(p.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum());
            });
            assert!((got - best).abs() < 1e-12);
        }
    }

    fn permute(p: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
        if k == p.len() {
            f(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(p, k + 1, f);
            p.swap(k, i);
        }
    }

    #[test]
    fn sliced_below_exact() {
        let mut rng = stream_rng(1, 0);
        let pts = |rng: &mut rand_chacha::ChaCha8Rng, s: f64| -> Vec<[f64; 2]> {
            (0..200)
                .map(|_| {
                    let mut v = [0.0; 2];
                    fill_normal(rng, &mut v);
                    [v[0] * s, v[1]]
                })
                .collect()
        };
        let a = pts(&mut rng, 1.0);
        let b = pts(&mut rng, 2.0);
        assert!(empirical_w1_sliced(&a, &b, 64) <= empirical_w1_exact(&a, &b) + 1e-12);
    }

    #[test]
    fn gaussian_is_zero() {
        let w = projected_w1_estimate(&InputDistribution::gaussian(10), 3, 3, 300, 2).unwrap();
        assert_eq!(w.value, 0.0);
    }

    #[test]
    fn rademacher_coordinate_plane() {
        // E sqrt((|Z1| - 1)^2 + (|Z2| - 1)^2), by 2-d quadrature.
        let exact = 0.824_528_514_044_119;
        let dist = InputDistribution::product(6, ScalarLaw::Rademacher);
        let w = projected_w1_estimate(&dist, 1, 0, 1500, 9).unwrap();
        assert_eq!(w.best_plane.coordinate, Some((0, 1)));
        assert!((w.value - exact).abs() < 0.05, "{}", w.value);
    }

    #[test]
    fn running_max_is_monotone_and_prefix_stable() {
        let dist = InputDistribution::product(8, ScalarLaw::Uniform);
        let short = projected_w1_estimate(&dist, 2, 2, 200, 5).unwrap();
        let long = projected_w1_estimate(&dist, 2, 6, 200, 5).unwrap();
        assert_eq!(short.per_plane[..], long.per_plane[..4]);
        assert!(long.value >= short.value);
        assert!(long.running_max().windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn sphere_estimate_decreases_with_dimension() {
        let v: Vec<f64> = [25usize, 100, 400]
            .iter()
            .map(|&d| {
                projected_w1_estimate(&InputDistribution::sphere(d), 2, 2, 400, 3)
                    .unwrap()
                    .value
            })
            .collect();
        assert!(v[0] > v[1] && v[1] > v[2], "{v:?}");
    }

    #[test]
    fn coordinate_pairs_enumerate() {
        let d = 4;
        let pairs: Vec<_> = (0..6).map(|k| coordinate_pair(d, k)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    }
}
