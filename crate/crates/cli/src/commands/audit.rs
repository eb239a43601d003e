use rayon::prelude::*;
use simodel::orthopoly::{audit, write_audit_csv, AuditRow};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::Output;

/// Invariant suite over the configured `(j, d)` grid.
pub fn cmd_polynomial_audit(config: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let s = config.audit.as_ref().expect("validated");
    let pairs: Vec<(usize, usize)> = s
        .degrees
        .iter()
        .flat_map(|&j| s.dimensions.iter().map(move |&d| (j, d)))
        .collect();
    let rows: Vec<AuditRow> = pairs.par_iter().map(|&(j, d)| audit(j, d)).collect::<Result<_, _>>()?;
    out.csv("audit.csv", |buf| Ok(write_audit_csv(&rows, buf)?))?;
    let failed = rows.iter().filter(|r| !r.pass()).count();
    if failed > 0 {
        return Err(CliError::Numerical(simodel::Error::InvalidParameter(format!(
            "{failed} of {} audit rows failed",
            rows.len()
        ))));
    }
    log::info!("all {} audit rows pass", rows.len());
    Ok(())
}
