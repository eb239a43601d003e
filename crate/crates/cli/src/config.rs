//! TOML experiment configuration.
//!
//! A file names one experiment `kind` and carries the matching section.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use simodel::dynamics::{InitSpec, Schedule, SgdConfig, TargetSpec, DEFAULT_STOP_EPS};
use simodel::landscape::LinkFunction;
use simodel::measures::{DistributionKind, InputDistribution};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    LandscapeCurve,
    SgdRuns,
    ScalingSweep,
    PerturbationReport,
    PolynomialAudit,
}

impl ExperimentKind {
    pub fn verb(self) -> &'static str {
        match self {
            ExperimentKind::LandscapeCurve => "landscape",
            ExperimentKind::SgdRuns => "runs",
            ExperimentKind::ScalingSweep => "sweep",
            ExperimentKind::PerturbationReport => "perturb",
            ExperimentKind::PolynomialAudit => "audit",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "yes")]
    pub plots: bool,
    /// Worker threads; all available cores when omitted.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub landscape: Option<LandscapeSection>,
    #[serde(default)]
    pub sgd: Option<SgdSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub perturb: Option<PerturbSection>,
    #[serde(default)]
    pub audit: Option<AuditSection>,
}

fn default_trials() -> usize {
    20
}

fn yes() -> bool {
    true
}

/// Link family instantiated at the run dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LinkSpec {
    Hermite {
        coefficients: Vec<f64>,
    },
    /// `P_{degree,d}(t/√d)`, scaled to unit norm when `orthonormal`.
    Gegenbauer {
        degree: usize,
        #[serde(default = "yes")]
        orthonormal: bool,
    },
    Linear,
    MonotoneSine {
        amplitude: f64,
    },
}

impl LinkSpec {
    pub fn build(&self, d: usize) -> LinkFunction {
        match self {
            LinkSpec::Hermite { coefficients } => LinkFunction::hermite(coefficients.clone()),
            LinkSpec::Gegenbauer {
                degree,
                orthonormal: true,
            } => LinkFunction::gegenbauer_orthonormal(*degree, d),
            LinkSpec::Gegenbauer {
                degree,
                orthonormal: false,
            } => LinkFunction::gegenbauer(*degree, d),
            LinkSpec::Linear => LinkFunction::Linear,
            LinkSpec::MonotoneSine { amplitude } => LinkFunction::MonotoneSine { amplitude: *amplitude },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSection {
    #[serde(default = "default_degree")]
    pub degree: usize,
    pub dimensions: Vec<usize>,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_degree() -> usize {
    4
}

fn default_points() -> usize {
    401
}

/// Dynamics settings shared by `sgd_runs` and `scaling_sweep`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    pub link: LinkSpec,
    pub distribution: DistributionKind,
    pub schedule: Schedule,
    pub epsilon: f64,
    /// `T = horizon_factor · rate(d)/ε` unless `max_steps` is given.
    #[serde(default = "one")]
    pub horizon_factor: f64,
    #[serde(default)]
    pub max_steps: Option<u64>,
    #[serde(default = "default_target")]
    pub target: TargetSpec,
    #[serde(default = "default_stop_eps")]
    pub stop_eps: f64,
    #[serde(default)]
    pub stride: Option<u64>,
    #[serde(default = "half")]
    pub weak_level: f64,
    #[serde(default = "strong")]
    pub strong_level: f64,
    #[serde(default)]
    pub track_sparsity: bool,
    /// `ξ` in the sparsity threshold `sqrt(ξ log T / d)`.
    #[serde(default = "default_xi")]
    pub sparsity_xi: f64,
}

fn default_xi() -> f64 {
    2.0
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn strong() -> f64 {
    0.9
}

fn default_stop_eps() -> f64 {
    DEFAULT_STOP_EPS
}

fn default_target() -> TargetSpec {
    TargetSpec::Axis { index: 0 }
}

impl DynamicsSection {
    pub fn build(&self, d: usize, init: InitSpec, seed: u64) -> Result<SgdConfig, CliError> {
        let dist = InputDistribution::new(d, self.distribution.clone()).map_err(CliError::from_config)?;
        let mut c = SgdConfig::new(self.link.build(d), dist, self.schedule, self.epsilon);
        c.max_steps = self
            .max_steps
            .unwrap_or_else(|| self.schedule.horizon(d, self.epsilon, self.horizon_factor));
        c.target = self.target;
        c.init = init;
        c.stop_level = (self.stop_eps > 0.0).then_some(1.0 - self.stop_eps);
        c.stride = self.stride;
        c.weak_level = self.weak_level;
        c.strong_level = self.strong_level;
        c.track_sparsity = self.track_sparsity;
        c.seed = seed;
        c.validate().map_err(CliError::from_config)?;
        Ok(c)
    }
}

/// Removes `keys` from a section table and parses the rest as strict
/// dynamics settings.
fn split_dynamics<E: serde::de::Error>(
    mut table: toml::Table,
    keys: &[&str],
) -> Result<(toml::Table, DynamicsSection), E> {
    let mut own = toml::Table::new();
    for k in keys {
        if let Some(v) = table.remove(*k) {
            own.insert((*k).to_string(), v);
        }
    }
    let dynamics = toml::Value::Table(table).try_into().map_err(E::custom)?;
    Ok((own, dynamics))
}

fn field<T: serde::de::DeserializeOwned, E: serde::de::Error>(
    table: &mut toml::Table,
    key: &'static str,
) -> Result<Option<T>, E> {
    table.remove(key).map(|v| v.try_into().map_err(E::custom)).transpose()
}

#[derive(Debug, Clone, Serialize)]
pub struct SgdSection {
    pub dimension: usize,
    #[serde(flatten)]
    pub dynamics: DynamicsSection,
    /// One group of trials per initialization.
    pub inits: Vec<InitSpec>,
}

impl<'de> Deserialize<'de> for SgdSection {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let (mut own, dynamics) = split_dynamics(toml::Table::deserialize(de)?, &["dimension", "inits"])?;
        Ok(Self {
            dimension: field(&mut own, "dimension")?.ok_or_else(|| serde::de::Error::missing_field("dimension"))?,
            inits: field(&mut own, "inits")?.unwrap_or_else(|| vec![InitSpec::HalfSphere]),
            dynamics,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSection {
    pub dimensions: Vec<usize>,
    #[serde(flatten)]
    pub dynamics: DynamicsSection,
    pub init: InitSpec,
}

impl<'de> Deserialize<'de> for SweepSection {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let (mut own, dynamics) = split_dynamics(toml::Table::deserialize(de)?, &["dimensions", "init"])?;
        Ok(Self {
            dimensions: field(&mut own, "dimensions")?.ok_or_else(|| serde::de::Error::missing_field("dimensions"))?,
            init: field(&mut own, "init")?.unwrap_or(InitSpec::HalfSphere),
            dynamics,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbSection {
    pub dimension: usize,
    pub link: LinkSpec,
    pub distribution: DistributionKind,
    #[serde(default = "default_target")]
    pub target: TargetSpec,
    /// Correlation grid, `0, 0.1, …, 0.9` when omitted.
    #[serde(default)]
    pub correlations: Option<Vec<f64>>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "yes")]
    pub coupled: bool,
    #[serde(default = "default_planes")]
    pub coordinate_planes: usize,
    #[serde(default = "default_planes")]
    pub random_planes: usize,
    #[serde(default = "default_w1_samples")]
    pub w1_samples: usize,
}

fn default_samples() -> usize {
    100_000
}

fn default_planes() -> usize {
    8
}

fn default_w1_samples() -> usize {
    500
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    pub degrees: Vec<usize>,
    pub dimensions: Vec<usize>,
}

fn missing(section: &str, kind: ExperimentKind) -> CliError {
    CliError::Config(format!("kind `{}` needs a [{section}] section", kind.verb()))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok((Self::parse(&text)?, text))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.trials == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        let nonempty = |v: &[usize], what: &str| {
            if v.is_empty() {
                Err(CliError::Config(format!("{what} must not be empty")))
            } else {
                Ok(())
            }
        };
        match self.kind {
            ExperimentKind::LandscapeCurve => {
                let s = self.landscape.as_ref().ok_or_else(|| missing("landscape", self.kind))?;
                nonempty(&s.dimensions, "landscape.dimensions")?;
                if s.points < 2 {
                    return Err(CliError::Config("landscape.points must be at least 2".into()));
                }
            }
            ExperimentKind::SgdRuns => {
                let s = self.sgd.as_ref().ok_or_else(|| missing("sgd", self.kind))?;
                if s.inits.is_empty() {
                    return Err(CliError::Config("sgd.inits must not be empty".into()));
                }
                for init in &s.inits {
                    s.dynamics.build(s.dimension, *init, self.seed)?;
                }
            }
            ExperimentKind::ScalingSweep => {
                let s = self.sweep.as_ref().ok_or_else(|| missing("sweep", self.kind))?;
                nonempty(&s.dimensions, "sweep.dimensions")?;
                for &d in &s.dimensions {
                    s.dynamics.build(d, s.init, self.seed)?;
                }
            }
            ExperimentKind::PerturbationReport => {
                let s = self.perturb.as_ref().ok_or_else(|| missing("perturb", self.kind))?;
                InputDistribution::new(s.dimension, s.distribution.clone()).map_err(CliError::from_config)?;
                s.link.build(s.dimension).validate().map_err(CliError::from_config)?;
                if s.samples < 2 || s.w1_samples == 0 || s.coordinate_planes + s.random_planes == 0 {
                    return Err(CliError::Config(
                        "perturb needs samples >= 2 and at least one plane".into(),
                    ));
                }
            }
            ExperimentKind::PolynomialAudit => {
                let s = self.audit.as_ref().ok_or_else(|| missing("audit", self.kind))?;
                nonempty(&s.degrees, "audit.degrees")?;
                nonempty(&s.dimensions, "audit.dimensions")?;
            }
        }
        Ok(())
    }
}
