use std::io::Write;

use serde::Serialize;

use super::gegenbauer::{derivative_raw, eval_raw, GegenbauerBasis};
use crate::error::Result;

/// Slack on root brackets, which are attained with equality in low degree.
pub const BRACKET_SLACK: f64 = 1e-12;
pub const ORTHOGONALITY_TOL: f64 = 1e-10;
pub const UNIT_AT_ONE_TOL: f64 = 1e-12;
pub const DERIVATIVE_REL_TOL: f64 = 1e-9;
/// Prefactor of the `υ` envelope `C [1 - (λ/(j+λ))^2]^{j/2}`.
pub const UPSILON_ENVELOPE: f64 = 10.0;

/// Invariant checks for one `(j, d)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRow {
    pub degree: usize,
    pub dimension: usize,
    /// `max |<P_i, P_k>_{u_d}|` over `i < k <= j`.
    pub orthogonality: f64,
    pub unit_at_one: f64,
    /// Largest relative gap between the shifted-parameter derivative formula
    /// and the derivative of the three-term recurrence.
    pub derivative_rel: f64,
    pub largest_root: f64,
    pub max_residual: f64,
    pub bracket_ok: bool,
    /// `None` below degree 3.
    pub two_sided_ok: Option<bool>,
    pub upsilon: Option<f64>,
    pub upsilon_envelope: Option<f64>,
}

impl AuditRow {
    pub fn orthogonality_ok(&self) -> bool {
        self.orthogonality <= ORTHOGONALITY_TOL
    }

    pub fn unit_ok(&self) -> bool {
        self.unit_at_one <= UNIT_AT_ONE_TOL
    }

    pub fn derivative_ok(&self) -> bool {
        self.derivative_rel <= DERIVATIVE_REL_TOL
    }

    pub fn upsilon_ok(&self) -> bool {
        match (self.upsilon, self.upsilon_envelope) {
            (Some(u), Some(e)) => u <= e,
            _ => true,
        }
    }

    pub fn pass(&self) -> bool {
        self.orthogonality_ok()
            && self.unit_ok()
            && self.derivative_ok()
            && self.bracket_ok
            && self.two_sided_ok.unwrap_or(true)
            && self.upsilon_ok()
    }
}

/// `P'_{0..=j}` at `t` by differentiating the three-term recurrence.
pub fn recurrence_derivatives(d: f64, j: usize, t: f64) -> Vec<f64> {
    let mut p = vec![0.0; j + 1];
    let mut dp = vec![0.0; j + 1];
    p[0] = 1.0;
    if j >= 1 {
        p[1] = t;
        dp[1] = 1.0;
    }
    for k in 1..j {
        let kf = k as f64;
        let a = 2.0 * kf + d - 2.0;
        let c = kf + d - 2.0;
        p[k + 1] = (a * t * p[k] - kf * p[k - 1]) / c;
        dp[k + 1] = (a * (p[k] + t * dp[k]) - kf * dp[k - 1]) / c;
    }
    dp
}

/// `C [1 - (λ/(j+λ))^2]^{j/2}` with `λ = d/2 - 1`.
pub fn upsilon_envelope(j: usize, d: usize) -> f64 {
    let lambda = d as f64 / 2.0 - 1.0;
    let r = lambda / (j as f64 + lambda);
    UPSILON_ENVELOPE * (1.0 - r * r).powf(j as f64 / 2.0)
}

/// Runs every invariant check on `P_{j,d}`.
pub fn audit(j: usize, d: usize) -> Result<AuditRow> {
    let basis = GegenbauerBasis::new(d, j.max(1))?;
    let df = d as f64;
    let rule = basis.quadrature(j + 2)?;
    let table: Vec<Vec<f64>> = rule.nodes.iter().map(|&t| basis.eval_all(t)).collect::<Result<_>>()?;
    let mut orthogonality: f64 = 0.0;
    for i in 0..=j {
        for k in (i + 1)..=j {
            let ip: f64 = table.iter().zip(&rule.weights).map(|(p, w)| w * p[i] * p[k]).sum();
            orthogonality = orthogonality.max(ip.abs());
        }
    }
    let grid: Vec<f64> = (0..=200).map(|i| -1.0 + i as f64 / 100.0).collect();
    let (shifted, direct): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .map(|&t| (derivative_raw(df, j, t), recurrence_derivatives(df, j, t)[j]))
        .unzip();
    let scale = direct.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let derivative_rel = shifted
        .iter()
        .zip(&direct)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1e-6 * scale).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let (largest_root, max_residual, bracket_ok, two_sided_ok) = if j >= 2 {
        let rep = basis.roots(j)?;
        let z2 = rep.largest * rep.largest;
        let two = rep
            .bracket
            .squared_two_sided
            .map(|(lo, hi)| z2 >= lo - BRACKET_SLACK && z2 <= hi + BRACKET_SLACK);
        (rep.largest, rep.max_residual(), rep.bracket_holds(BRACKET_SLACK), two)
    } else {
        (0.0, 0.0, true, None)
    };
    let (upsilon, upsilon_env) = if j >= 2 {
        (Some(basis.upsilon(j)?), Some(upsilon_envelope(j, d)))
    } else {
        (None, None)
    };
    Ok(AuditRow {
        degree: j,
        dimension: d,
        orthogonality,
        unit_at_one: (eval_raw(df, j, 1.0) - 1.0).abs(),
        derivative_rel,
        largest_root,
        max_residual,
        bracket_ok,
        two_sided_ok,
        upsilon,
        upsilon_envelope: upsilon_env,
    })
}

/// Pass/fail matrix with one row per `(j, d)`.
pub fn write_audit_csv<W: Write>(rows: &[AuditRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "j",
        "d",
        "orthogonality",
        "unit_at_one",
        "derivative",
        "bracket",
        "two_sided",
        "upsilon_bound",
        "largest_root",
        "max_residual",
        "pass",
    ])?;
    let flag = |b: bool| if b { "pass" } else { "fail" }.to_string();
    for r in rows {
        w.write_record([
            r.degree.to_string(),
            r.dimension.to_string(),
            flag(r.orthogonality_ok()),
            flag(r.unit_ok()),
            flag(r.derivative_ok()),
            flag(r.bracket_ok),
            r.two_sided_ok.map_or_else(|| "n/a".to_string(), flag),
            if r.upsilon.is_some() {
                flag(r.upsilon_ok())
            } else {
                "n/a".into()
            },
            r.largest_root.to_string(),
            r.max_residual.to_string(),
            flag(r.pass()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recurrence_derivative_closed_forms() {
        let d = 7.0;
        let t: f64 = 0.37;
        let dp = recurrence_derivatives(d, 3, t);
        assert!((dp[2] - 2.0 * d * t / (d - 1.0)).abs() < 1e-15);
        assert!((dp[3] - (3.0 * (d + 2.0) * t * t - 3.0) / (d - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn audit_passes_on_moderate_grid() {
        for d in [4usize, 10, 50] {
            for j in [0usize, 1, 2, 3, 8, 20] {
                let r = audit(j, d).unwrap();
                assert!(r.pass(), "{r:?}");
            }
        }
    }

    #[test]
    fn csv_has_one_row_per_pair() {
        let rows = vec![audit(3, 6).unwrap(), audit(4, 6).unwrap()];
        let mut buf = Vec::new();
        write_audit_csv(&rows, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 3);
        assert!(s.lines().nth(1).unwrap().ends_with(",pass"));
    }
}
