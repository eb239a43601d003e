use rayon::prelude::*;
use simodel::dynamics::{run_trial, sparsity_tracker, InitSpec, SgdTrajectory, TrialStatus};

use super::check_partial;
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::Output;
use crate::svg::{Mark, Plot, PALETTE};

fn init_label(init: &InitSpec) -> String {
    match init {
        InitSpec::Uniform => "uniform".into(),
        InitSpec::HalfSphere => "half_sphere".into(),
        InitSpec::Planted { m0 } => format!("planted_{m0}"),
    }
}

/// Independent trials at one dimension, one group per initialization.
pub fn cmd_sgd_runs(config: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let s = config.sgd.as_ref().expect("validated");
    let mut groups: Vec<(String, Vec<SgdTrajectory>, u64)> = Vec::new();
    for (g, init) in s.inits.iter().enumerate() {
        let sgd = s
            .dynamics
            .build(s.dimension, *init, config.seed.wrapping_add(g as u64))?;
        let trajs: Vec<SgdTrajectory> = (0..config.trials as u64)
            .into_par_iter()
            .map(|k| run_trial(&sgd, k))
            .collect::<Result<_, _>>()?;
        log::info!(
            "{}: {} of {} trials reached m >= {}",
            init_label(init),
            trajs
                .iter()
                .filter(|t| t.hitting_time(sgd.weak_level).is_some())
                .count(),
            trajs.len(),
            sgd.weak_level
        );
        groups.push((init_label(init), trajs, sgd.max_steps));
    }
    out.csv("trajectories.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["init", "trial", "t", "m", "r", "grad_norm", "l4sq"])?;
        for (label, trajs, _) in &groups {
            for (k, t) in trajs.iter().enumerate() {
                for r in &t.records {
                    w.write_record([
                        label.clone(),
                        k.to_string(),
                        r.t.to_string(),
                        r.m.to_string(),
                        r.r.to_string(),
                        r.grad_norm.to_string(),
                        r.l4sq.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    })?;
    let (weak, strong) = (s.dynamics.weak_level, s.dynamics.strong_level);
    out.csv("runs_summary.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record([
            "init",
            "trial",
            "m_initial",
            "m_final",
            "tau_weak",
            "tau_strong",
            "steps",
            "status",
        ])?;
        let opt = |t: Option<u64>| t.map_or_else(String::new, |v| v.to_string());
        for (label, trajs, _) in &groups {
            for (k, t) in trajs.iter().enumerate() {
                w.write_record([
                    label.clone(),
                    k.to_string(),
                    t.m_initial.to_string(),
                    t.m_final.to_string(),
                    opt(t.hitting_time(weak)),
                    opt(t.hitting_time(strong)),
                    t.steps.to_string(),
                    t.status.label().to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    if s.dynamics.track_sparsity {
        let reports = groups
            .iter()
            .map(|(label, trajs, horizon)| {
                sparsity_tracker(trajs, s.dynamics.sparsity_xi, *horizon).map(|r| (label.clone(), r))
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.json("sparsity.json", &reports)?;
    }
    let mut plot = Plot::new(&format!("SGD overlap, d = {}", s.dimension), "t", "m_t");
    for (g, (label, trajs, _)) in groups.iter().enumerate() {
        let color = PALETTE[g % PALETTE.len()];
        for (k, t) in trajs.iter().enumerate() {
            let pts = t.records.iter().map(|r| (r.t as f64, r.m)).collect();
            plot.add(if k == 0 { label } else { "" }, color, Mark::Line, pts);
        }
    }
    out.svg("runs.svg", plot.render())?;
    let total: usize = groups.iter().map(|(_, t, _)| t.len()).sum();
    let aborted = groups
        .iter()
        .flat_map(|(_, t, _)| t)
        .filter(|t| matches!(t.status, TrialStatus::Aborted { .. }))
        .count();
    check_partial(aborted, total)
}
