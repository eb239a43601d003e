use serde::Serialize;
use simodel::dynamics::TargetSpec;
use simodel::measures::{stream_rng, uniform_sphere_point, InputDistribution};
use simodel::perturb::{default_correlations, perturbation_sweep, write_report_csv, PerturbationSweep};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::Output;
use crate::svg::{Mark, Plot, PALETTE};

#[derive(Serialize)]
struct RatioRow {
    m: f64,
    delta_grad: f64,
    gradient_ratio_log: f64,
    gradient_ratio_log_sq: f64,
}

#[derive(Serialize)]
struct PerturbSummary {
    w1_lower_bound: f64,
    w1_planes: usize,
    rows: Vec<RatioRow>,
}

/// Landscape and gradient deviations from the Gaussian across correlations.
pub fn cmd_perturbation(config: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let s = config.perturb.as_ref().expect("validated");
    let d = s.dimension;
    let theta_star = match s.target {
        TargetSpec::Axis { index } => {
            if index >= d {
                return Err(CliError::Config(format!("target index {index} outside dimension {d}")));
            }
            let mut e = vec![0.0; d];
            e[index] = 1.0;
            e
        }
        TargetSpec::Uniform => uniform_sphere_point(&mut stream_rng(config.seed, u64::MAX), d),
    };
    let sweep = PerturbationSweep {
        distribution: InputDistribution::new(d, s.distribution.clone()).map_err(CliError::from_config)?,
        link: s.link.build(d),
        theta_star,
        correlations: s.correlations.clone().unwrap_or_else(default_correlations),
        samples: s.samples,
        coupled: s.coupled,
        coordinate_planes: s.coordinate_planes,
        random_planes: s.random_planes,
        w1_samples: s.w1_samples,
        seed: config.seed,
    };
    let rows = perturbation_sweep(&sweep)?;
    out.csv("perturbation.csv", |buf| Ok(write_report_csv(&rows, buf)?))?;
    let summary = PerturbSummary {
        w1_lower_bound: rows.first().map_or(f64::NAN, |r| r.w1_lower_bound),
        w1_planes: rows.first().map_or(0, |r| r.w1_planes),
        rows: rows
            .iter()
            .map(|r| RatioRow {
                m: r.delta.m,
                delta_grad: r.delta.delta_grad,
                gradient_ratio_log: r.gradient_ratio_log,
                gradient_ratio_log_sq: r.gradient_ratio_log_sq,
            })
            .collect(),
    };
    out.json("perturbation_summary.json", &summary)?;
    let mut plot = Plot::new(&format!("deviation from the Gaussian, d = {d}"), "m", "deviation");
    plot.add(
        "delta_L",
        PALETTE[0],
        Mark::Line,
        rows.iter().map(|r| (r.delta.m, r.delta.delta_l)).collect(),
    );
    plot.add(
        "delta_gradL",
        PALETTE[1],
        Mark::Line,
        rows.iter().map(|r| (r.delta.m, r.delta.delta_grad)).collect(),
    );
    out.svg("perturbation.svg", plot.render())?;
    Ok(())
}
