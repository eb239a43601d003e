mod audit;
mod landscape;
mod perturb;
mod runs;
mod sweep;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::output::Output;

pub use audit::cmd_polynomial_audit;
pub use landscape::cmd_landscape;
pub use perturb::cmd_perturbation;
pub use runs::cmd_sgd_runs;
pub use sweep::cmd_scaling_sweep;

/// Runs the experiment named by `config.kind`.
pub fn dispatch(config: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    match config.kind {
        ExperimentKind::LandscapeCurve => cmd_landscape(config, out),
        ExperimentKind::SgdRuns => cmd_sgd_runs(config, out),
        ExperimentKind::ScalingSweep => cmd_scaling_sweep(config, out),
        ExperimentKind::PerturbationReport => cmd_perturbation(config, out),
        ExperimentKind::PolynomialAudit => cmd_polynomial_audit(config, out),
    }
}

/// Fails with exit code 4 when some trials aborted.
fn check_partial(aborted: usize, total: usize) -> Result<(), CliError> {
    if aborted > 0 {
        log::warn!("{aborted} of {total} trials aborted");
        return Err(CliError::Partial { aborted, total });
    }
    Ok(())
}
