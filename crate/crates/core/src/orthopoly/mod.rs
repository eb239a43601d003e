//! Orthogonal polynomial engine.
//!
//! Gegenbauer polynomials `P_{j,d}` are normalized so that `P_{j,d}(1) = 1` and
//! evaluated directly through their three-term recurrence in that
//! normalization, which avoids Gamma-function overflow at large `j + d`.
//! Roots come from the symmetric Jacobi matrix of the recurrence and are
//! polished by one guarded Newton step. Hermite polynomials use the
//! orthonormal probabilists' convention.

mod audit;
mod gegenbauer;
mod hermite;
mod quadrature;
pub(crate) mod tridiag;

use std::io::Write;

pub use audit::{
    audit, recurrence_derivatives, upsilon_envelope, write_audit_csv, AuditRow, BRACKET_SLACK, DERIVATIVE_REL_TOL,
    ORTHOGONALITY_TOL, UNIT_AT_ONE_TOL, UPSILON_ENVELOPE,
};
pub(crate) use gegenbauer::{clenshaw_raw, derivative_raw, eval_all_raw, eval_raw};
pub use gegenbauer::{
    harmonic_dimension, ln_harmonic_dimension, root_bracket, GegenbauerBasis, RecurrenceTriple, RootBracket, RootReport,
};
pub(crate) use hermite::hermite_all_raw;
pub use hermite::HermiteBasis;
pub use quadrature::QuadratureRule;

use crate::error::Result;

/// Writes root reports as CSV with columns `j, d, k, root, residual`.
pub fn write_roots_csv<W: Write>(reports: &[RootReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "d", "k", "root", "residual"])?;
    for r in reports {
        for (k, (z, res)) in r.roots.iter().zip(&r.residuals).enumerate() {
            w.write_record([
                r.degree.to_string(),
                r.dimension.to_string(),
                k.to_string(),
                z.to_string(),
                res.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the recurrence table as CSV with columns `j, a, b, c`.
pub fn write_recurrence_csv<W: Write>(basis: &GegenbauerBasis, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "a", "b", "c"])?;
    for (j, r) in basis.recurrence().iter().enumerate() {
        w.write_record([j.to_string(), r.a.to_string(), r.b.to_string(), r.c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
