use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orthopoly::{derivative_raw, eval_raw, harmonic_dimension};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied link with its first derivative and optional higher ones.
#[derive(Clone)]
pub struct CustomLink {
    pub name: String,
    pub value: ScalarFn,
    pub derivative: ScalarFn,
    pub second: Option<ScalarFn>,
    pub third: Option<ScalarFn>,
}

impl fmt::Debug for CustomLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomLink").field("name", &self.name).finish()
    }
}

/// Scalar link `φ` of the single-index model `y = φ(x·θ*)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LinkFunction {
    /// `Σ_j c_j h_j(t)` in the orthonormal Hermite basis.
    Hermite { coefficients: Vec<f64> },
    /// `scale · P_{degree,dimension}(t / radius)`.
    Gegenbauer {
        degree: usize,
        dimension: usize,
        radius: f64,
        scale: f64,
    },
    /// `φ(t) = t`.
    Linear,
    /// `φ(t) = t + a sin(t)`, increasing for `|a| < 1`.
    MonotoneSine { amplitude: f64 },
    #[serde(skip)]
    Custom(CustomLink),
}

/// Gegenbauer factor in `P'_{j,d} = c(j,d) P_{j-1,d+2}`.
fn shift_factor(j: usize, d: f64) -> f64 {
    let j = j as f64;
    j * (j + d - 2.0) / (d - 1.0)
}

impl LinkFunction {
    pub fn hermite(coefficients: Vec<f64>) -> Self {
        LinkFunction::Hermite { coefficients }
    }

    /// Single orthonormal Hermite polynomial `h_j`.
    pub fn hermite_pure(j: usize) -> Self {
        let mut c = vec![0.0; j + 1];
        c[j] = 1.0;
        LinkFunction::Hermite { coefficients: c }
    }

    /// `P_{s,d}(t/√d)`.
    pub fn gegenbauer(degree: usize, dimension: usize) -> Self {
        LinkFunction::Gegenbauer {
            degree,
            dimension,
            radius: (dimension as f64).sqrt(),
            scale: 1.0,
        }
    }

    /// `√N(s,d) · P_{s,d}(t/√d)`, of unit norm under `√d S^{d-1}`.
    pub fn gegenbauer_orthonormal(degree: usize, dimension: usize) -> Self {
        LinkFunction::Gegenbauer {
            degree,
            dimension,
            radius: (dimension as f64).sqrt(),
            scale: harmonic_dimension(degree, dimension).sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LinkFunction::Hermite { coefficients } if coefficients.is_empty() => {
                Err(Error::InvalidParameter("hermite link needs coefficients".into()))
            }
            LinkFunction::Gegenbauer { dimension, radius, .. } => {
                if *dimension < 3 {
                    return Err(Error::InvalidDimension(*dimension));
                }
                if !(*radius > 0.0) {
                    return Err(Error::InvalidParameter("gegenbauer radius must be positive".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Short human-readable descriptor.
    pub fn describe(&self) -> String {
        match self {
            LinkFunction::Hermite { coefficients } => format!("hermite{coefficients:?}"),
            LinkFunction::Gegenbauer {
                degree,
                dimension,
                scale,
                ..
            } => format!("gegenbauer(s={degree}, d={dimension}, scale={scale})"),
            LinkFunction::Linear => "linear".into(),
            LinkFunction::MonotoneSine { amplitude } => format!("t+{amplitude}sin(t)"),
            LinkFunction::Custom(c) => c.name.clone(),
        }
    }

    /// Largest degree for polynomial links.
    pub fn polynomial_degree(&self) -> Option<usize> {
        match self {
            LinkFunction::Hermite { coefficients } => Some(coefficients.len().saturating_sub(1)),
            LinkFunction::Gegenbauer { degree, .. } => Some(*degree),
            LinkFunction::Linear => Some(1),
            _ => None,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.value_and_derivative(t).0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.value_and_derivative(t).1
    }

    /// `(φ(t), φ'(t))` in one pass.
    pub fn value_and_derivative(&self, t: f64) -> (f64, f64) {
        match self {
            LinkFunction::Hermite { coefficients } => {
                let (mut prev, mut cur) = (0.0, 1.0);
                let (mut v, mut dv) = (coefficients[0], 0.0);
                for (j, c) in coefficients.iter().enumerate().skip(1) {
                    let jf = j as f64;
                    let next = if j == 1 {
                        t
                    } else {
                        (t * cur - (jf - 1.0).sqrt() * prev) / jf.sqrt()
                    };
                    dv += c * jf.sqrt() * cur;
                    prev = cur;
                    cur = next;
                    v += c * cur;
                }
                (v, dv)
            }
            LinkFunction::Gegenbauer {
                degree,
                dimension,
                radius,
                scale,
            } => {
                let d = *dimension as f64;
                let s = t / radius;
                (
                    scale * eval_raw(d, *degree, s),
                    scale / radius * derivative_raw(d, *degree, s),
                )
            }
            LinkFunction::Linear => (t, 1.0),
            LinkFunction::MonotoneSine { amplitude } => (t + amplitude * t.sin(), 1.0 + amplitude * t.cos()),
            LinkFunction::Custom(c) => ((c.value)(t), (c.derivative)(t)),
        }
    }

    /// `φ''(t)` when available.
    pub fn second_derivative(&self, t: f64) -> Option<f64> {
        self.higher_derivative(t, 2)
    }

    /// `φ'''(t)` when available.
    pub fn third_derivative(&self, t: f64) -> Option<f64> {
        self.higher_derivative(t, 3)
    }

    fn higher_derivative(&self, t: f64, order: usize) -> Option<f64> {
        match self {
            LinkFunction::Hermite { coefficients } => {
                let n = coefficients.len();
                let mut h = vec![0.0; n];
                crate::orthopoly::hermite_all_raw(t, &mut h);
                let mut total = 0.0;
                for (j, c) in coefficients.iter().enumerate().skip(order) {
                    let falling: f64 = (0..order).map(|i| (j - i) as f64).product();
                    total += c * falling.sqrt() * h[j - order];
                }
                Some(total)
            }
            LinkFunction::Gegenbauer {
                degree,
                dimension,
                radius,
                scale,
            } => {
                if *degree < order {
                    return Some(0.0);
                }
                let mut d = *dimension as f64;
                let mut factor = *scale;
                for i in 0..order {
                    factor *= shift_factor(degree - i, d) / radius;
                    d += 2.0;
                }
                Some(factor * eval_raw(d, degree - order, t / radius))
            }
            LinkFunction::Linear => Some(0.0),
            LinkFunction::MonotoneSine { amplitude } => Some(match order {
                2 => -amplitude * t.sin(),
                _ => -amplitude * t.cos(),
            }),
            LinkFunction::Custom(c) => match order {
                2 => c.second.as_ref().map(|f| f(t)),
                _ => c.third.as_ref().map(|f| f(t)),
            },
        }
    }

    /// Largest relative mismatch between supplied derivatives and central
    /// differences at the given points.
    pub fn derivative_consistency(&self, points: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for &t in points {
            let h = 1e-5 * t.abs().max(1.0);
            let fd1 = (self.value(t + h) - self.value(t - h)) / (2.0 * h);
            let d1 = self.derivative(t);
            worst = worst.max((fd1 - d1).abs() / d1.abs().max(1.0));
            if let Some(d2) = self.second_derivative(t) {
                let fd2 = (self.derivative(t + h) - self.derivative(t - h)) / (2.0 * h);
                worst = worst.max((fd2 - d2).abs() / d2.abs().max(1.0));
            }
        }
        worst
    }
}
