//! Online spherical SGD with fresh samples.
//!
//! Each step draws `x ~ ν`, forms the spherical gradient of
//! `l(θ, x) = (φ(x·θ) - φ(x·θ*))^2` and retracts to the sphere by normalizing.
//! Trials record the correlation `m_t = θ_t·θ*` at a stride, while hitting
//! times are tracked exactly at every step.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::landscape::{vector_at_correlation, LinkFunction, LossProfile};
use crate::measures::{stream_rng, uniform_sphere_point, InputDistribution};

/// Step-size presets. `log` is the natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// `δ = ε/d`.
    S1,
    /// `δ = ε/(d log d)`.
    S2,
    /// `δ = ε d^{-s/2}`.
    SGe3 {
        exponent: u32,
    },
    /// `δ = ε/d`, paired with the `d log(1/ε)/ε` horizon.
    Strong,
    Manual {
        step: f64,
    },
}

impl Schedule {
    pub fn step_size(&self, d: usize, eps: f64) -> f64 {
        let df = d as f64;
        match *self {
            Schedule::S1 | Schedule::Strong => eps / df,
            Schedule::S2 => eps / (df * df.ln()),
            Schedule::SGe3 { exponent } => eps * df.powf(-(exponent as f64) / 2.0),
            Schedule::Manual { step } => step,
        }
    }

    /// `factor · rate(d)/ε` with rate `d`, `d log^2 d`, `d^{s-1}` or
    /// `d log(1/ε)`. Manual schedules use `factor · d/ε`.
    pub fn horizon(&self, d: usize, eps: f64, factor: f64) -> u64 {
        let df = d as f64;
        let rate = match *self {
            Schedule::S1 | Schedule::Manual { .. } => df,
            Schedule::S2 => df * df.ln().powi(2),
            Schedule::SGe3 { exponent } => df.powi(exponent as i32 - 1),
            Schedule::Strong => df * (1.0 / eps).ln().max(1.0),
        };
        (factor * rate / eps).ceil() as u64
    }

    /// Preset matched to an information exponent.
    pub fn for_exponent(s: usize) -> Self {
        match s {
            0 | 1 => Schedule::S1,
            2 => Schedule::S2,
            s => Schedule::SGe3 { exponent: s as u32 },
        }
    }
}

/// Ground-truth direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Axis { index: usize },
    Uniform,
}

/// Initialization of `θ_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    Uniform,
    /// Uniform with the sign flipped so that `m_0 >= 0`.
    HalfSphere,
    /// `m_0` fixed, orthogonal part uniform.
    Planted {
        m0: f64,
    },
}

#[derive(Debug, Clone)]
pub struct SgdConfig {
    pub link: LinkFunction,
    pub distribution: InputDistribution,
    pub target: TargetSpec,
    pub init: InitSpec,
    pub schedule: Schedule,
    pub epsilon: f64,
    pub max_steps: u64,
    /// Stop once `m_t >= stop_level`.
    pub stop_level: Option<f64>,
    pub weak_level: f64,
    pub strong_level: f64,
    /// Recording stride; `None` means `max(1, T/10^4)`.
    pub stride: Option<u64>,
    pub diagnostics: bool,
    /// Population profile used for the drift term of the diagnostics.
    pub population: Option<Arc<LossProfile>>,
    pub track_sparsity: bool,
    pub seed: u64,
}

/// Default stopping level `1 - ε_stop`.
pub const DEFAULT_STOP_EPS: f64 = 0.05;

impl SgdConfig {
    pub fn new(link: LinkFunction, distribution: InputDistribution, schedule: Schedule, epsilon: f64) -> Self {
        let max_steps = schedule.horizon(distribution.dimension, epsilon, 1.0);
        Self {
            link,
            distribution,
            target: TargetSpec::Axis { index: 0 },
            init: InitSpec::HalfSphere,
            schedule,
            epsilon,
            max_steps,
            stop_level: Some(1.0 - DEFAULT_STOP_EPS),
            weak_level: 0.5,
            strong_level: 0.9,
            stride: None,
            diagnostics: false,
            population: None,
            track_sparsity: false,
            seed: 0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.distribution.dimension
    }

    pub fn step_size(&self) -> f64 {
        self.schedule.step_size(self.dimension(), self.epsilon)
    }

    pub fn stride(&self) -> u64 {
        self.stride.unwrap_or((self.max_steps / 10_000).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        self.distribution.validate()?;
        self.link.validate()?;
        let delta = self.step_size();
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("step size {delta} must be positive")));
        }
        if let TargetSpec::Axis { index } = self.target {
            if index >= self.dimension() {
                return Err(Error::InvalidParameter(format!("axis {index} out of range")));
            }
        }
        if let InitSpec::Planted { m0 } = self.init {
            if !(-1.0..=1.0).contains(&m0) {
                return Err(Error::InvalidParameter(format!(
                    "planted correlation {m0} outside [-1, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Per-step quantities of one SGD update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics {
    /// `x·θ`.
    pub u: f64,
    /// `x·θ*`.
    pub v: f64,
    /// Scalar factor `2(φ(u) - φ(v)) φ'(u)` of `∇l = g x`.
    pub g: f64,
    /// Normalizer `r_t = |θ - δ ∇^S l|`.
    pub r: f64,
    /// `|∇^S l|`.
    pub grad_norm: f64,
    /// `∇^S l · θ*`.
    pub sgrad_dot: f64,
    /// `|x|^2`.
    pub x_norm_sq: f64,
    /// Correlation after the step.
    pub m_next: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// In-place spherical SGD step.
pub fn sgd_step_in_place(
    theta: &mut [f64],
    x: &[f64],
    delta: f64,
    link: &LinkFunction,
    theta_star: &[f64],
) -> StepDiagnostics {
    let (mut u, mut v, mut xx, mut m) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..theta.len() {
        u += x[i] * theta[i];
        v += x[i] * theta_star[i];
        xx += x[i] * x[i];
        m += theta[i] * theta_star[i];
    }
    let (pu, dpu) = link.value_and_derivative(u);
    let g = 2.0 * (pu - link.value(v)) * dpu;
    let a = 1.0 + delta * g * u;
    let b = delta * g;
    let (mut nn, mut mm) = (0.0, 0.0);
    for i in 0..theta.len() {
        let t = a * theta[i] - b * x[i];
        theta[i] = t;
        nn += t * t;
        mm += t * theta_star[i];
    }
    let r = nn.sqrt();
    let inv = 1.0 / r;
    for t in theta.iter_mut() {
        *t *= inv;
    }
    StepDiagnostics {
        u,
        v,
        g,
        r,
        grad_norm: g.abs() * (xx - u * u).max(0.0).sqrt(),
        sgrad_dot: g * (v - u * m),
        x_norm_sq: xx,
        m_next: mm * inv,
    }
}

/// Pure SGD step: returns the next iterate and the step diagnostics.
pub fn sgd_step(
    theta: &[f64],
    x: &[f64],
    delta: f64,
    link: &LinkFunction,
    theta_star: &[f64],
) -> (Vec<f64>, StepDiagnostics) {
    let mut next = theta.to_vec();
    let diag = sgd_step_in_place(&mut next, x, delta, link, theta_star);
    (next, diag)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: u64,
    pub m: f64,
    /// Normalizer of the step that produced this iterate (1 at `t = 0`).
    pub r: f64,
    pub grad_norm: f64,
    /// `∇^S l·θ*` of the step that produced this iterate.
    pub sgrad_dot: f64,
    /// `‖θ_t‖_4^2`.
    pub l4sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrialStatus {
    /// All `T` steps executed.
    Completed,
    /// Reached the stopping level.
    Stopped,
    Aborted {
        step: u64,
        reason: String,
    },
}

impl TrialStatus {
    pub fn label(&self) -> &'static str {
        match self {
            TrialStatus::Completed => "completed",
            TrialStatus::Stopped => "stopped",
            TrialStatus::Aborted { .. } => "aborted",
        }
    }
}

/// Cumulative decomposition `m_t = m_0 + drift + martingale + discretization`
/// and moment estimates on the sample stream.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Decomposition {
    pub t: Vec<u64>,
    /// `Σ δ (-∇^S L·θ*)`, from the population profile.
    pub drift: Vec<f64>,
    /// `Σ -δ (∇^S l - ∇^S L)·θ*`.
    pub martingale: Vec<f64>,
    /// `Σ (m_{t+1} - m_t + δ ∇^S l·θ*)`, the retraction effect.
    pub discretization: Vec<f64>,
    /// Estimate of `E[(x·θ*)^2 g^2]`.
    pub k_hat: f64,
    /// Estimate of `E[|x|^2 g^2] / d`.
    pub k1_hat: f64,
    /// Estimate of `E[|x|^4 g^2] / d^2`.
    pub k2_hat: f64,
    /// Estimate of `E|∇l|^2`.
    pub grad_second_moment: f64,
    /// Estimate of `E|∇l|^4`.
    pub grad_fourth_moment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SgdTrajectory {
    pub dimension: usize,
    pub step_size: f64,
    pub records: Vec<StepRecord>,
    /// `(a, τ⁺_a)` for the weak, strong and stopping levels.
    pub hitting: Vec<(f64, Option<u64>)>,
    pub m_initial: f64,
    pub m_final: f64,
    pub steps: u64,
    pub status: TrialStatus,
    /// Largest `‖θ_t‖_4^2` over all steps, when tracked.
    pub sup_l4sq: Option<f64>,
    pub max_norm_error: f64,
    pub diagnostics: Option<Decomposition>,
}

impl SgdTrajectory {
    /// First time `m_t >= a` for a tracked level.
    pub fn hitting_time(&self, a: f64) -> Option<u64> {
        self.hitting
            .iter()
            .find(|(l, _)| (l - a).abs() < 1e-15)
            .and_then(|(_, t)| *t)
    }

    /// CSV with columns `t, m, r, grad_norm, l4sq`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "m", "r", "grad_norm", "l4sq"])?;
        for r in &self.records {
            w.write_record([
                r.t.to_string(),
                r.m.to_string(),
                r.r.to_string(),
                r.grad_norm.to_string(),
                r.l4sq.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn l4_norm_sq(theta: &[f64]) -> f64 {
    theta.iter().map(|t| t.powi(4)).sum::<f64>().sqrt()
}

fn initial_vectors(config: &SgdConfig, trial: u64) -> (Vec<f64>, Vec<f64>) {
    let d = config.dimension();
    let mut rng = stream_rng(config.seed, 4 * trial);
    let theta_star = match config.target {
        TargetSpec::Axis { index } => {
            let mut e = vec![0.0; d];
            e[index] = 1.0;
            e
        }
        TargetSpec::Uniform => uniform_sphere_point(&mut rng, d),
    };
    let theta0 = match config.init {
        InitSpec::Uniform => uniform_sphere_point(&mut rng, d),
        InitSpec::HalfSphere => {
            let mut t = uniform_sphere_point(&mut rng, d);
            if dot(&t, &theta_star) < 0.0 {
                t.iter_mut().for_each(|v| *v = -*v);
            }
            t
        }
        InitSpec::Planted { m0 } => vector_at_correlation(&theta_star, m0, config.seed, 4 * trial + 2),
    };
    (theta0, theta_star)
}

/// Runs trial `trial` of `config` with its own RNG streams.
pub fn run_trial(config: &SgdConfig, trial: u64) -> Result<SgdTrajectory> {
    config.validate()?;
    let (theta0, theta_star) = initial_vectors(config, trial);
    let mut rng = stream_rng(config.seed, 4 * trial + 1);
    let dist = &config.distribution;
    run_with(config, theta0, &theta_star, |x| dist.sample_into(&mut rng, x))
}

/// Runs SGD from `theta0` with samples drawn by `sampler`.
pub fn run_with<F: FnMut(&mut [f64])>(
    config: &SgdConfig,
    mut theta: Vec<f64>,
    theta_star: &[f64],
    mut sampler: F,
) -> Result<SgdTrajectory> {
    let d = theta.len();
    if d != config.dimension() || theta_star.len() != d {
        return Err(Error::InvalidParameter(
            "vector lengths do not match the dimension".into(),
        ));
    }
    let delta = config.step_size();
    let stride = config.stride();
    let mut levels = vec![config.weak_level, config.strong_level];
    if let Some(s) = config.stop_level {
        levels.push(s);
    }
    let mut hitting: Vec<(f64, Option<u64>)> = levels.iter().map(|&a| (a, None)).collect();
    let mut m = dot(&theta, theta_star);
    let m_initial = m;
    let mark = |hitting: &mut Vec<(f64, Option<u64>)>, m: f64, t: u64| {
        for (a, tau) in hitting.iter_mut() {
            if tau.is_none() && m >= *a {
                *tau = Some(t);
            }
        }
    };
    mark(&mut hitting, m, 0);
    let mut records = vec![StepRecord {
        t: 0,
        m,
        r: 1.0,
        grad_norm: 0.0,
        sgrad_dot: 0.0,
        l4sq: l4_norm_sq(&theta),
    }];
    let mut sup_l4 = config.track_sparsity.then(|| l4_norm_sq(&theta));
    let mut max_norm_error: f64 = 0.0;
    let mut dec = config.diagnostics.then(Decomposition::default);
    let (mut c_drift, mut c_mart, mut c_disc) = (0.0, 0.0, 0.0);
    let mut mom = [0.0f64; 5];
    let mut x = vec![0.0; d];
    let mut status = TrialStatus::Completed;
    let mut steps = 0;
    let stopped = |m: f64| config.stop_level.is_some_and(|s| m >= s);

    if stopped(m) {
        status = TrialStatus::Stopped;
    }
    while steps < config.max_steps && status == TrialStatus::Completed {
        sampler(&mut x);
        let diag = sgd_step_in_place(&mut theta, &x, delta, &config.link, theta_star);
        steps += 1;
        if !(diag.r.is_finite() && diag.m_next.is_finite() && diag.r > 0.0) {
            status = TrialStatus::Aborted {
                step: steps,
                reason: "non-finite gradient".into(),
            };
            break;
        }
        if let Some(dec) = dec.as_mut() {
            let pg = config.population.as_ref().map_or(f64::NAN, |p| p.projected_gradient(m));
            c_drift += delta * pg;
            c_mart += -delta * (diag.sgrad_dot + pg);
            c_disc += diag.m_next - (m - delta * diag.sgrad_dot);
            let g2 = diag.g * diag.g;
            mom[0] += diag.v * diag.v * g2;
            mom[1] += diag.x_norm_sq * g2;
            mom[2] += diag.x_norm_sq * diag.x_norm_sq * g2;
            mom[3] += g2 * g2 * diag.x_norm_sq * diag.x_norm_sq;
            if steps % stride == 0 {
                dec.t.push(steps);
                dec.drift.push(c_drift);
                dec.martingale.push(c_mart);
                dec.discretization.push(c_disc);
            }
        }
        m = diag.m_next;
        mark(&mut hitting, m, steps);
        if let Some(s) = sup_l4.as_mut() {
            *s = s.max(l4_norm_sq(&theta));
        }
        if stopped(m) {
            status = TrialStatus::Stopped;
        }
        let last = steps == config.max_steps || status != TrialStatus::Completed;
        if steps % stride == 0 || last {
            let nrm = dot(&theta, &theta).sqrt();
            max_norm_error = max_norm_error.max((nrm - 1.0).abs());
            records.push(StepRecord {
                t: steps,
                m,
                r: diag.r,
                grad_norm: diag.grad_norm,
                sgrad_dot: diag.sgrad_dot,
                l4sq: l4_norm_sq(&theta),
            });
        }
    }
    if let Some(dec) = dec.as_mut() {
        if dec.t.last() != Some(&steps) {
            dec.t.push(steps);
            dec.drift.push(c_drift);
            dec.martingale.push(c_mart);
            dec.discretization.push(c_disc);
        }
        let n = steps.max(1) as f64;
        let df = d as f64;
        dec.k_hat = mom[0] / n;
        dec.k1_hat = mom[1] / n / df;
        dec.k2_hat = mom[2] / n / (df * df);
        dec.grad_second_moment = mom[1] / n;
        dec.grad_fourth_moment = mom[3] / n;
    }
    Ok(SgdTrajectory {
        dimension: d,
        step_size: delta,
        records,
        hitting,
        m_initial,
        m_final: m,
        steps,
        status,
        sup_l4sq: sup_l4,
        max_norm_error,
        diagnostics: dec,
    })
}

/// Cumulative decomposition series of a trajectory recorded with diagnostics.
pub fn monitor_decomposition(trajectory: &SgdTrajectory) -> Result<&Decomposition> {
    trajectory
        .diagnostics
        .as_ref()
        .ok_or_else(|| Error::Unsupported("trajectory recorded without diagnostics".into()))
}

/// Deterministic zero-noise flow: SGD with the per-sample gradient replaced
/// by the population gradient `ℓ'(m)(θ* - m θ)`. Returns `m_0, ..., m_T`.
pub fn population_flow(profile: &LossProfile, m0: f64, step: f64, steps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut m = m0;
    out.push(m);
    for _ in 0..steps {
        let lp = profile.derivative(m);
        let q = 1.0 - m * m;
        let r = (1.0 + step * step * lp * lp * q).sqrt();
        m = ((m - step * lp * q) / r).clamp(-1.0, 1.0);
        out.push(m);
    }
    out
}

/// Monte-Carlo moments of the full per-sample gradient `∇l = g x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientMoments {
    pub second: f64,
    pub second_se: f64,
    pub fourth: f64,
    pub fourth_se: f64,
}

pub fn gradient_moments(
    link: &LinkFunction,
    dist: &InputDistribution,
    theta: &[f64],
    theta_star: &[f64],
    n: usize,
    seed: u64,
) -> GradientMoments {
    let mut rng = stream_rng(seed, 0);
    let mut x = vec![0.0; dist.dimension];
    let mut s = [0.0f64; 4];
    for _ in 0..n {
        dist.sample_into(&mut rng, &mut x);
        let u = dot(&x, theta);
        let v = dot(&x, theta_star);
        let (pu, dpu) = link.value_and_derivative(u);
        let g = 2.0 * (pu - link.value(v)) * dpu;
        let a = g * g * dot(&x, &x);
        s[0] += a;
        s[1] += a * a;
        s[2] += a * a;
        s[3] += a.powi(4);
    }
    let nf = n as f64;
    let m2 = s[0] / nf;
    let m4 = s[2] / nf;
    GradientMoments {
        second: m2,
        second_se: ((s[1] / nf - m2 * m2).max(0.0) / nf).sqrt(),
        fourth: m4,
        fourth_se: ((s[3] / nf - m4 * m4).max(0.0) / nf).sqrt(),
    }
}

/// Sparsity of the iterates against the threshold `sqrt(ξ log T / d)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsityReport {
    pub sup_values: Vec<f64>,
    pub threshold: f64,
    pub exceedances: usize,
    pub trials: usize,
}

pub fn sparsity_tracker(trajectories: &[SgdTrajectory], xi: f64, horizon: u64) -> Result<SparsityReport> {
    let d = trajectories
        .first()
        .map(|t| t.dimension)
        .ok_or_else(|| Error::InvalidParameter("no trajectories".into()))?;
    let sup_values = trajectories
        .iter()
        .map(|t| {
            t.sup_l4sq
                .ok_or_else(|| Error::Unsupported("trajectory recorded without sparsity tracking".into()))
        })
        .collect::<Result<Vec<f64>>>()?;
    let threshold = (xi * (horizon.max(2) as f64).ln() / d as f64).sqrt();
    let exceedances = sup_values.iter().filter(|&&v| v >= threshold).count();
    Ok(SparsityReport {
        trials: sup_values.len(),
        sup_values,
        threshold,
        exceedances,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub tau_weak: Option<u64>,
    pub tau_strong: Option<u64>,
    pub m_final: f64,
    pub steps: u64,
    pub status: TrialStatus,
}

impl TrialOutcome {
    pub fn from_trajectory(trial: u64, config: &SgdConfig, t: &SgdTrajectory) -> Self {
        Self {
            trial,
            tau_weak: t.hitting_time(config.weak_level),
            tau_strong: t.hitting_time(config.strong_level),
            m_final: t.m_final,
            steps: t.steps,
            status: t.status.clone(),
        }
    }

    /// `τ_strong - τ_weak` for trials that reached both levels.
    pub fn strong_duration(&self) -> Option<u64> {
        Some(self.tau_strong? - self.tau_weak?)
    }
}

/// Empirical quantile with unfinished trials counted as `+∞`.
pub fn censored_quantile(values: &[Option<u64>], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values.iter().map(|t| t.map_or(f64::INFINITY, |x| x as f64)).collect();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let f = pos - lo as f64;
    let val = if lo == hi { v[lo] } else { v[lo] * (1.0 - f) + v[hi] * f };
    val.is_finite().then_some(val)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsemblePoint {
    pub dimension: usize,
    pub step_size: f64,
    pub max_steps: u64,
    pub outcomes: Vec<TrialOutcome>,
    pub success_rate: f64,
    /// Quartiles of the weak hitting time; `None` when censored.
    pub tau_quartiles: [Option<f64>; 3],
    pub median_strong_duration: Option<f64>,
}

/// Least-squares fit of `log median τ` against `log d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% interval from the Student t distribution.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Quadratic coefficient of the log-log fit, with three or more points.
    pub curvature: Option<f64>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub points: Vec<EnsemblePoint>,
    pub fit: SlopeFit,
}

/// Runs `trials` independent trials per dimension and fits the log-log slope
/// of the median weak hitting time.
pub fn run_ensemble<F>(make_config: F, dims: &[usize], trials: usize) -> Result<EnsembleResult>
where
    F: Fn(usize) -> SgdConfig + Sync,
{
    if trials == 0 || dims.is_empty() {
        return Err(Error::InvalidParameter(
            "ensemble needs trials >= 1 and a dimension".into(),
        ));
    }
    let mut points = Vec::with_capacity(dims.len());
    for &d in dims {
        let config = make_config(d);
        config.validate()?;
        let outcomes: Vec<TrialOutcome> = (0..trials as u64)
            .into_par_iter()
            .map(|k| run_trial(&config, k).map(|t| TrialOutcome::from_trajectory(k, &config, &t)))
            .collect::<Result<_>>()?;
        if outcomes.iter().all(|o| matches!(o.status, TrialStatus::Aborted { .. })) {
            return Err(Error::NonFinite {
                step: 0,
                what: "every trial aborted",
            });
        }
        let taus: Vec<Option<u64>> = outcomes.iter().map(|o| o.tau_weak).collect();
        let durations: Vec<Option<u64>> = outcomes
            .iter()
            .filter(|o| o.tau_weak.is_some())
            .map(|o| o.strong_duration())
            .collect();
        points.push(EnsemblePoint {
            dimension: d,
            step_size: config.step_size(),
            max_steps: config.max_steps,
            success_rate: taus.iter().filter(|t| t.is_some()).count() as f64 / trials as f64,
            tau_quartiles: [
                censored_quantile(&taus, 0.25),
                censored_quantile(&taus, 0.5),
                censored_quantile(&taus, 0.75),
            ],
            median_strong_duration: censored_quantile(&durations, 0.5),
            outcomes,
        });
    }
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.tau_quartiles[1].map(|t| ((p.dimension as f64).ln(), t.max(1.0).ln())))
        .collect();
    if xy.len() < points.len() {
        log::warn!(
            "{} dimensions have a censored median and are left out of the fit",
            points.len() - xy.len()
        );
    }
    Ok(EnsembleResult {
        fit: fit_log_slope(&xy),
        points,
    })
}

/// Ordinary least squares with a 95% interval on the slope; NaN when fewer
/// than two points.
pub fn fit_log_slope(xy: &[(f64, f64)]) -> SlopeFit {
    let n = xy.len();
    let nan = SlopeFit {
        slope: f64::NAN,
        intercept: f64::NAN,
        ci_low: f64::NAN,
        ci_high: f64::NAN,
        curvature: None,
        points: n,
    };
    if n < 2 {
        if n == 1 {
            log::warn!("single dimension: slope undetermined");
        }
        return nan;
    }
    let nf = n as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (ci_low, ci_high) = if n > 2 {
        let sse: f64 = xy.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        let se = (sse / (nf - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, nf - 2.0)
            .map(|s| s.inverse_cdf(0.975))
            .unwrap_or(f64::NAN);
        (slope - t * se, slope + t * se)
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    };
    SlopeFit {
        slope,
        intercept,
        ci_low,
        ci_high,
        curvature: (n >= 3).then(|| quadratic_coefficient(xy, mx)),
        points: n,
    }
}

/// Coefficient `c` of `y ≈ a + b (x - x̄) + c (x - x̄)^2`.
fn quadratic_coefficient(xy: &[(f64, f64)], mx: f64) -> f64 {
    let mut s = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for &(x, y) in xy {
        let z = [1.0, x - mx, (x - mx).powi(2)];
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] += z[i] * z[j];
            }
            r[i] += z[i] * y;
        }
    }
    // Cramer's rule on the 3x3 normal equations.
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let mut m2 = s;
    for i in 0..3 {
        m2[i][2] = r[i];
    }
    det(&m2) / det(&s)
}

/// CSV with columns `d, trial, tau_half, tau_strong, m_final, status`.
pub fn write_ensemble_csv<W: Write>(result: &EnsembleResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["d", "trial", "tau_half", "tau_strong", "m_final", "status"])?;
    let opt = |t: Option<u64>| t.map_or_else(String::new, |v| v.to_string());
    for p in &result.points {
        for o in &p.outcomes {
            w.write_record([
                p.dimension.to_string(),
                o.trial.to_string(),
                opt(o.tau_weak),
                opt(o.tau_strong),
                o.m_final.to_string(),
                o.status.label().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
