use serde::Serialize;
use simodel::dynamics::{run_ensemble, write_ensemble_csv, SlopeFit, TrialStatus};

use super::check_partial;
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::Output;
use crate::svg::{Mark, Plot, PALETTE};

#[derive(Serialize)]
struct PointSummary {
    d: usize,
    step_size: f64,
    max_steps: u64,
    success_rate: f64,
    tau_q25: Option<f64>,
    tau_median: Option<f64>,
    tau_q75: Option<f64>,
    median_strong_duration: Option<f64>,
}

#[derive(Serialize)]
struct FitSummary<'a> {
    fit: &'a SlopeFit,
    points: Vec<PointSummary>,
}

/// Median hitting time across dimensions and its log-log slope.
pub fn cmd_scaling_sweep(config: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let s = config.sweep.as_ref().expect("validated");
    let configs = s
        .dimensions
        .iter()
        .map(|&d| s.dynamics.build(d, s.init, config.seed).map(|c| (d, c)))
        .collect::<Result<Vec<_>, _>>()?;
    let result = run_ensemble(
        |d| {
            configs
                .iter()
                .find(|(k, _)| *k == d)
                .map(|(_, c)| c.clone())
                .expect("built above")
        },
        &s.dimensions,
        config.trials,
    )?;
    out.csv("ensemble.csv", |buf| Ok(write_ensemble_csv(&result, buf)?))?;
    let points: Vec<PointSummary> = result
        .points
        .iter()
        .map(|p| PointSummary {
            d: p.dimension,
            step_size: p.step_size,
            max_steps: p.max_steps,
            success_rate: p.success_rate,
            tau_q25: p.tau_quartiles[0],
            tau_median: p.tau_quartiles[1],
            tau_q75: p.tau_quartiles[2],
            median_strong_duration: p.median_strong_duration,
        })
        .collect();
    log::info!(
        "slope {:.3} [{:.3}, {:.3}] over {} dimensions",
        result.fit.slope,
        result.fit.ci_low,
        result.fit.ci_high,
        result.fit.points
    );
    let mut plot = Plot::new("median weak hitting time", "d", "tau");
    plot.log_x = true;
    plot.log_y = true;
    let medians: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.tau_median.map(|t| (p.d as f64, t)))
        .collect();
    plot.add("median", PALETTE[0], Mark::Points, medians.clone());
    if result.fit.slope.is_finite() {
        let line = medians
            .iter()
            .map(|&(d, _)| (d, (result.fit.intercept + result.fit.slope * d.ln()).exp()))
            .collect();
        plot.add(&format!("slope {:.2}", result.fit.slope), PALETTE[1], Mark::Line, line);
    }
    out.json(
        "scaling_fit.json",
        &FitSummary {
            fit: &result.fit,
            points,
        },
    )?;
    out.svg("scaling.svg", plot.render())?;
    let outcomes = result.points.iter().flat_map(|p| &p.outcomes);
    let total = outcomes.clone().count();
    let aborted = outcomes
        .filter(|o| matches!(o.status, TrialStatus::Aborted { .. }))
        .count();
    check_partial(aborted, total)
}
