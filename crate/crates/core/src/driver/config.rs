//! Run configuration, read from a TOML file.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assembly::BlochVector;
use crate::dispersion::DispersionModel;
use crate::error::{Error, Result};
use crate::mesh::MAX_LEVEL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Inverse iteration for a constant inclusion permittivity.
    Linear,
    /// Inverse iteration on the companion system of a lossless Lorentz model.
    DlLinearized,
    /// Bordered Newton iteration for a general real model.
    Newton,
    /// Vacuum cell, compared against the analytic free-space band.
    HomogeneousCheck,
    /// Smallest eigenvalue along a path of wave vectors.
    KSweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    /// Iteration steps per mesh level before refining.
    #[serde(default = "default_steps_per_mesh")]
    pub steps_per_mesh: usize,
    /// Finest level; iteration continues there until `tol` or `max_steps`.
    #[serde(default = "default_max_level")]
    pub max_level: u32,
    /// Run every step on `max_level`.
    #[serde(default)]
    pub fine_only: bool,
    /// Total step budget.
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            steps_per_mesh: default_steps_per_mesh(),
            max_level: default_max_level(),
            fine_only: false,
            max_steps: default_max_steps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Defaults to `max_level + 1`.
    #[serde(default)]
    pub level: Option<u32>,
    #[serde(default = "default_reference_tol")]
    pub tol: f64,
    #[serde(default = "default_reference_steps")]
    pub max_steps: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            enabled: true,
            level: None,
            tol: default_reference_tol(),
            max_steps: default_reference_steps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonConfig {
    /// Constant inclusion permittivity of the warm-start surrogate.
    #[serde(default = "default_warm_eps2")]
    pub warm_eps2: f64,
    /// Inverse iteration steps of the warm start.
    #[serde(default = "default_warm_steps")]
    pub warm_steps: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            warm_eps2: default_warm_eps2(),
            warm_steps: default_warm_steps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Explicit wave vectors; overrides `path`.
    #[serde(default)]
    pub points: Vec<[f64; 2]>,
    /// Named path through the Brillouin zone: `gamma-x`, `gamma-x-m-gamma`.
    #[serde(default = "default_path")]
    pub path: String,
    #[serde(default = "default_points_per_segment")]
    pub points_per_segment: usize,
    /// Mesh level of every sweep point.
    #[serde(default = "default_sweep_level")]
    pub level: u32,
    /// Krylov dimension of each restarted projection.
    #[serde(default = "default_krylov_dim")]
    pub krylov_dim: usize,
    #[serde(default = "default_max_cycles")]
    pub max_cycles: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            points: Vec::new(),
            path: default_path(),
            points_per_segment: default_points_per_segment(),
            level: default_sweep_level(),
            krylov_dim: default_krylov_dim(),
            max_cycles: default_max_cycles(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default = "default_k")]
    pub k: [f64; 2],
    /// Background permittivity.
    #[serde(default = "one")]
    pub alpha1: f64,
    /// Shift; the companion system defaults to `max eta^2 - min eta^2 + 1`,
    /// all other solvers to 1.
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default = "default_model")]
    pub model: DispersionModel,
    /// Dual-norm residual at which the fine-level iteration stops.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub newton: NewtonConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_steps_per_mesh() -> usize {
    7
}
fn default_max_level() -> u32 {
    4
}
fn default_max_steps() -> usize {
    100
}
fn default_reference_tol() -> f64 {
    1e-12
}
fn default_reference_steps() -> usize {
    400
}
fn default_warm_eps2() -> f64 {
    2.0
}
fn default_warm_steps() -> usize {
    8
}
fn default_path() -> String {
    "gamma-x".into()
}
fn default_points_per_segment() -> usize {
    8
}
fn default_sweep_level() -> u32 {
    2
}
fn default_krylov_dim() -> usize {
    8
}
fn default_max_cycles() -> usize {
    50
}
fn default_k() -> [f64; 2] {
    [PI / 2.0, PI]
}
fn default_model() -> DispersionModel {
    DispersionModel::constant(1.0)
}
fn default_tol() -> f64 {
    1e-10
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Minimal configuration for `experiment` with defaults everywhere else.
    pub fn new(experiment: Experiment) -> Self {
        RunConfig {
            experiment,
            k: default_k(),
            alpha1: 1.0,
            beta: None,
            model: default_model(),
            tol: default_tol(),
            seed: 0,
            output: None,
            schedule: Schedule::default(),
            reference: ReferenceConfig::default(),
            newton: NewtonConfig::default(),
            sweep: SweepConfig::default(),
        }
    }

    pub fn bloch(&self) -> BlochVector {
        BlochVector::new(self.k[0], self.k[1])
    }

    /// Effective shift.
    pub fn shift(&self) -> Result<f64> {
        if let Some(b) = self.beta {
            return Ok(b);
        }
        Ok(match self.experiment {
            Experiment::DlLinearized => self.model.realize()?.shift_bound() + 1.0,
            _ => 1.0,
        })
    }

    pub fn reference_level(&self) -> u32 {
        self.reference.level.unwrap_or(self.schedule.max_level + 1)
    }

    /// Checks model-specific constraints before any work starts.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.k.iter().all(|v| v.is_finite()) {
            return bad(format!("wave vector must be finite, got {:?}", self.k));
        }
        if !(self.alpha1 > 0.0) {
            return Err(Error::InvalidPermittivity { value: self.alpha1 });
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.schedule.max_level > MAX_LEVEL {
            return Err(Error::LevelOutOfRange {
                level: self.schedule.max_level,
                max: MAX_LEVEL,
            });
        }
        if self.reference.enabled && self.reference_level() > MAX_LEVEL {
            return Err(Error::LevelOutOfRange {
                level: self.reference_level(),
                max: MAX_LEVEL,
            });
        }
        if self.schedule.steps_per_mesh == 0 {
            return bad("steps_per_mesh must be at least 1".into());
        }
        let beta = self.shift()?;
        if !(beta >= 0.0) {
            return bad(format!("shift must be non-negative, got {beta}"));
        }
        match self.experiment {
            Experiment::Linear | Experiment::KSweep => match self.model {
                DispersionModel::Constant { value } if value > 0.0 => {}
                DispersionModel::Constant { value } => return Err(Error::InvalidPermittivity { value }),
                _ => return bad(format!("{:?} needs a constant model", self.experiment)),
            },
            Experiment::DlLinearized => {
                let r = self.model.realize()?;
                if !(beta > r.shift_bound()) {
                    return Err(Error::InsufficientShift {
                        beta,
                        bound: r.shift_bound(),
                    });
                }
            }
            Experiment::Newton => {
                if !(self.newton.warm_eps2 > 0.0) {
                    return Err(Error::InvalidPermittivity {
                        value: self.newton.warm_eps2,
                    });
                }
            }
            Experiment::HomogeneousCheck => {}
        }
        if self.experiment == Experiment::KSweep {
            if self.sweep.level > MAX_LEVEL {
                return Err(Error::LevelOutOfRange {
                    level: self.sweep.level,
                    max: MAX_LEVEL,
                });
            }
            if self.sweep.krylov_dim == 0 {
                return bad("krylov_dim must be at least 1".into());
            }
            if self.sweep_points()?.is_empty() {
                return bad("sweep path is empty".into());
            }
        }
        Ok(())
    }

    /// Wave vectors of the sweep.
    pub fn sweep_points(&self) -> Result<Vec<BlochVector>> {
        if !self.sweep.points.is_empty() {
            return Ok(self.sweep.points.iter().map(|p| BlochVector::new(p[0], p[1])).collect());
        }
        let corners: Vec<[f64; 2]> = match self.sweep.path.as_str() {
            "gamma-x" => vec![[0.0, 0.0], [PI, 0.0]],
            "gamma-x-m-gamma" => vec![[0.0, 0.0], [PI, 0.0], [PI, PI], [0.0, 0.0]],
            other => return Err(Error::Config(format!("unknown sweep path '{other}'"))),
        };
        let n = self.sweep.points_per_segment.max(1);
        let mut out = Vec::new();
        for (s, w) in corners.windows(2).enumerate() {
            for i in 0..n {
                if s > 0 && i == 0 {
                    continue;
                }
                let t = i as f64 / (n - 1).max(1) as f64;
                out.push(BlochVector::new(
                    w[0][0] + t * (w[1][0] - w[0][0]),
                    w[0][1] + t * (w[1][1] - w[0][1]),
                ));
            }
        }
        Ok(out)
    }
}
