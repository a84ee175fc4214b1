//! Scenario configuration (JSON with named blocks).
//!
//! ```json
//! {
//!   "name": "sec6_disturbed",
//!   "model": {"c": 0.1, "gamma": [[1.0]], "g": {"kind": "identity"}},
//!   "initial": {"kind": "two_box", "boxes": [[-1.0, -0.5], [0.25, 0.75]]},
//!   "controller": {"mode": "funnel", "phi": {...}, "reference": {...}},
//!   "disturbance": {"shape": {"kind": "dipole", ...}, "zero_mass": true},
//!   "solver": {"backends": ["spectral", "fd", "ode"], "horizon": 10.0, "dt": 0.001}
//! }
//! ```

use serde::{Deserialize, Serialize};

use crate::control::ControllerConfig;
use crate::density::InitialDensity;
use crate::error::{Error, Result};
use crate::model::{Disturbance, Nonlinearity, OuModel};
use crate::record::Backend;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub c: f64,
    /// Rows of the symmetric positive definite drift matrix.
    pub gamma: Vec<Vec<f64>>,
    #[serde(default)]
    pub g: Nonlinearity,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceConfig {
    #[serde(default)]
    pub shape: Disturbance,
    /// Asserts `int d(t, x) dx = 0`; verified before the run.
    #[serde(default)]
    pub zero_mass: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    /// Truncation order `k`; defaults to 40, 12, 6 for n = 1, 2, 3.
    #[serde(default)]
    pub order: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdConfig {
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_fd_points")]
    pub points: usize,
    #[serde(default = "default_fd_dt")]
    pub dt: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            half_width: default_half_width(),
            points: default_fd_points(),
            dt: default_fd_dt(),
        }
    }
}

/// Point grid for spectral snapshots and density minima.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub half_width: Option<f64>,
    /// Points per axis; defaults to 2000, 81, 21 for n = 1, 2, 3.
    #[serde(default)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub backends: Option<Vec<Backend>>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "one_usize")]
    pub record_every: usize,
    /// Recorded rows between spectral density minima (computed on the grid).
    #[serde(default = "default_density_every")]
    pub density_every: usize,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub fd: FdConfig,
    #[serde(default)]
    pub grid: GridConfig,
    /// Snapshot times; defaults to `0.025 i`, `i = 0..=120`.
    #[serde(default)]
    pub snapshots: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            backends: None,
            horizon: default_horizon(),
            dt: default_dt(),
            record_every: 1,
            density_every: default_density_every(),
            spectral: SpectralConfig::default(),
            fd: FdConfig::default(),
            grid: GridConfig::default(),
            snapshots: None,
        }
    }
}

fn default_half_width() -> f64 {
    5.0
}
fn default_fd_points() -> usize {
    2000
}
fn default_fd_dt() -> f64 {
    1e-4
}
fn default_horizon() -> f64 {
    10.0
}
fn default_dt() -> f64 {
    1e-3
}
fn one_usize() -> usize {
    1
}
fn default_density_every() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: ModelConfig,
    pub initial: InitialDensity,
    pub controller: ControllerConfig,
    #[serde(default)]
    pub disturbance: DisturbanceConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Output directory; defaults to `runs/<name>`.
    #[serde(default)]
    pub output: Option<String>,
}

/// Backend-independent part of a scenario; its canonical JSON is the record stamp.
#[derive(Serialize)]
struct Physics<'a> {
    model: &'a ModelConfig,
    initial: &'a InitialDensity,
    controller: &'a ControllerConfig,
    disturbance: &'a Disturbance,
    horizon: f64,
}

impl ScenarioConfig {
    /// Parses and validates; errors carry the offending field path and, for
    /// syntax errors, the line and column.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            // serde_json messages already end in "at line L column C"
            let message = e.into_inner().to_string();
            Error::config(if path == "." { "<root>".to_string() } else { path }, message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn model(&self) -> Result<OuModel> {
        if self.model.gamma.len() > crate::model::MAX_DIM {
            return Err(Error::UnsupportedDimension(self.model.gamma.len()));
        }
        OuModel::from_rows(self.model.c, &self.model.gamma)
    }

    pub fn dim(&self) -> usize {
        self.model.gamma.len()
    }

    /// Static checks that need no quadrature.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-' || ch == '.')
        {
            return Err(Error::config("name", "name must be non-empty [A-Za-z0-9_.-]"));
        }
        let model = self.model()?;
        let dim = model.dim();
        self.model.g.validate()?;
        self.disturbance.shape.validate(dim)?;
        self.initial.resolve(&model)?;
        let s = &self.solver;
        crate::ode::step_count(s.horizon, s.dt)?;
        if s.record_every == 0 || s.density_every == 0 {
            return Err(Error::config("solver.record_every", "must be at least 1"));
        }
        if let Some(backends) = &s.backends {
            if backends.is_empty() {
                return Err(Error::config("solver.backends", "at least one backend required"));
            }
            if dim != 1 && backends.contains(&Backend::Fd) {
                return Err(Error::config("solver.backends", "fd backend is one-dimensional only"));
            }
        }
        if self.spectral_order() == 0 {
            return Err(Error::config("solver.spectral.order", "order must be at least 1"));
        }
        if let Some(times) = &s.snapshots {
            if times.iter().any(|t| !t.is_finite() || *t < 0.0 || *t > s.horizon) {
                return Err(Error::config("solver.snapshots", "snapshot times must lie in [0, horizon]"));
            }
        }
        if let Some(w) = s.grid.half_width {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::config("solver.grid.half_width", "must be positive"));
            }
        }
        if s.grid.points.is_some_and(|p| p < 2) {
            return Err(Error::config("solver.grid.points", "need at least 2 points per axis"));
        }
        Ok(())
    }

    pub fn backends(&self) -> Vec<Backend> {
        match &self.solver.backends {
            Some(b) => b.clone(),
            None if self.dim() == 1 => Backend::ALL.to_vec(),
            None => vec![Backend::Spectral, Backend::Ode],
        }
    }

    pub fn spectral_order(&self) -> usize {
        self.solver.spectral.order.unwrap_or(match self.dim() {
            1 => 40,
            2 => 12,
            _ => 6,
        })
    }

    pub fn grid_points(&self) -> usize {
        self.solver.grid.points.unwrap_or(match self.dim() {
            1 => 2000,
            2 => 81,
            _ => 21,
        })
    }

    pub fn grid_half_width(&self) -> f64 {
        self.solver.grid.half_width.unwrap_or(default_half_width())
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        match &self.solver.snapshots {
            Some(t) => t.clone(),
            None => (0..=120).map(|i| 0.025 * i as f64).filter(|t| *t <= self.solver.horizon).collect(),
        }
    }

    pub fn output_dir(&self) -> String {
        self.output.clone().unwrap_or_else(|| format!("runs/{}", self.name))
    }

    pub fn stamp(&self) -> String {
        serde_json::to_string(&Physics {
            model: &self.model,
            initial: &self.initial,
            controller: &self.controller,
            disturbance: &self.disturbance.shape,
            horizon: self.solver.horizon,
        })
        .expect("config serializes")
    }

    /// The disturbed closed-loop experiment: funnel control of a two-box
    /// density tracking `sin t` under a zero-mass dipole disturbance.
    pub fn tracking_disturbed() -> Self {
        Self {
            name: "paper_sec6_disturbed".into(),
            model: ModelConfig {
                c: 0.1,
                gamma: vec![vec![1.0]],
                g: Nonlinearity::Identity,
            },
            initial: InitialDensity::asymmetric_two_box(),
            controller: ControllerConfig::sine_tracking_funnel(),
            disturbance: DisturbanceConfig {
                shape: Disturbance::Dipole {
                    amplitude: 3.0,
                    omega: 4.0,
                    width: 3.0,
                    axis: 0,
                },
                zero_mass: true,
            },
            // the disturbed density needs more than the default 40 modes near t = 1
            solver: SolverConfig {
                spectral: SpectralConfig { order: Some(60) },
                ..SolverConfig::default()
            },
            output: None,
        }
    }

    /// Same as [`Self::tracking_disturbed`] without the disturbance.
    pub fn tracking_clean() -> Self {
        Self {
            name: "paper_sec6_clean".into(),
            disturbance: DisturbanceConfig::default(),
            ..Self::tracking_disturbed()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_config_round_trips() {
        let cfg = ScenarioConfig::tracking_disturbed();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = ScenarioConfig::from_json_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.backends(), Backend::ALL.to_vec());
        assert_eq!(back.snapshot_times().len(), 121);
        assert_ne!(cfg.stamp(), ScenarioConfig::tracking_clean().stamp());
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let text = r#"{
            "name": "mini",
            "model": {"c": 1.0, "gamma": [[2.0, 0.5], [0.5, 1.0]]},
            "initial": {"kind": "stationary"},
            "controller": {"mode": "feedforward", "reference": {"kind": "zero"}}
        }"#;
        let cfg = ScenarioConfig::from_json_str(text).unwrap();
        assert_eq!(cfg.spectral_order(), 12);
        assert_eq!(cfg.backends(), vec![Backend::Spectral, Backend::Ode]);
        assert_eq!(cfg.output_dir(), "runs/mini");
        assert_eq!(cfg.solver.dt, 1e-3);
    }

    #[test]
    fn errors_carry_field_paths() {
        let text = r#"{"name": "x", "model": {"c": 0.1, "gamma": [[1.0]], "g": {"kind": "wobbly"}},
            "initial": {"kind": "stationary"}, "controller": {"mode": "feedforward", "reference": {"kind": "zero"}}}"#;
        match ScenarioConfig::from_json_str(text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "model.g.kind"),
            other => panic!("unexpected {other:?}"),
        }
        let text = r#"{"name": "x", "model": {"c": 0.1, "gamma": [[1.0]], "extra": 1}}"#;
        match ScenarioConfig::from_json_str(text) {
            Err(Error::Config { path, .. }) => assert!(path.starts_with("model"), "{path}"),
            other => panic!("unexpected {other:?}"),
        }
        let text = "{\n  \"name\": \"x\",\n  \"model\": {\"c\": -1, \"gamma\": [[1.0]]},\n";
        assert!(matches!(ScenarioConfig::from_json_str(text), Err(Error::Config { .. })));
    }

    #[test]
    fn semantic_errors() {
        let mut cfg = ScenarioConfig::tracking_clean();
        cfg.model.c = -0.1;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::tracking_clean();
        cfg.solver.dt = 0.3;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::tracking_clean();
        cfg.name = "../escape".into();
        assert!(cfg.validate().is_err());
    }
}
