//! Builds a scenario from its config and runs the backends into [`RunRecord`]s.

use std::collections::BTreeMap;

use serde_json::json;

use crate::config::ScenarioConfig;
use crate::control::{disturbance_mean_profile, mean_ode_closed_loop, Controller, MeanOde};
use crate::density::Density;
use crate::error::{Error, Result};
use crate::fd::FdSolver;
use crate::model::{Disturbance, OuModel};
use crate::ode::{step_count, Rk4};
use crate::quadrature::BoxRule;
use crate::record::{cov_len, snapshot_file_name, Backend, Row, RunMeta, RunRecord, Series, Snapshot, SnapshotEntry, FORMAT_VERSION};
use crate::spectral::{SpectralSolver, SpectralState};

const ZERO_MASS_SAMPLES: usize = 101;

/// A validated scenario with everything resolved that the backends share.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: OuModel,
    pub density: Density,
    pub controller: Controller,
    /// Box quadrature for projections of `p0` and `d`.
    pub rule: BoxRule,
    /// `P0 = int p0`.
    pub mass0: f64,
    /// `E0 = int x p0`.
    pub mean0: Vec<f64>,
    /// `int x profile(x) dx` of the disturbance.
    pub dbar_profile: Vec<f64>,
}

impl Scenario {
    /// Resolves and checks the scenario; nothing is solved yet. Fails on an
    /// infeasible funnel start, zero mass in funnel mode, or a disturbance
    /// flagged zero-mass that is not.
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let model = config.model()?;
        let dim = model.dim();
        config.model.g.verify_bound(dim)?;
        let density = config.initial.resolve(&model)?;
        let horizon = config.solver.horizon;
        let controller = config.controller.build(&model, horizon)?;
        let disturbance = &config.disturbance.shape;
        let half_width = Self::projection_half_width(&density, disturbance);
        let rule = BoxRule::covering(dim, half_width, &density.breakpoints());
        if config.disturbance.zero_mass {
            let times: Vec<f64> = (0..ZERO_MASS_SAMPLES)
                .map(|i| horizon * i as f64 / (ZERO_MASS_SAMPLES - 1) as f64)
                .collect();
            disturbance.verify_zero_mass(&times, &rule)?;
        }
        let (mass0, mean0) = density.mass_and_mean(dim);
        controller.check_start(mass0, &mean0)?;
        let dbar_profile = disturbance_mean_profile(disturbance, &rule)?;
        Ok(Self {
            config,
            model,
            density,
            controller,
            rule,
            mass0,
            mean0,
            dbar_profile,
        })
    }

    fn projection_half_width(density: &Density, d: &Disturbance) -> f64 {
        let dist = match d {
            Disturbance::None => 0.0,
            Disturbance::Dipole { width, .. } => (40.0 / width).sqrt() + 1.0,
            Disturbance::Bump { width, center, .. } => {
                (40.0 / width).sqrt() + center.iter().fold(0.0f64, |m, c| m.max(c.abs()))
            }
        };
        BoxRule::DEFAULT_HALF_WIDTH.max(density.extent() + 1.0).max(dist)
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn disturbance(&self) -> &Disturbance {
        &self.config.disturbance.shape
    }

    /// `dbar(t)`.
    pub fn disturbance_mean(&self, t: f64) -> Vec<f64> {
        let f = self.disturbance().time_factor(t);
        self.dbar_profile.iter().map(|v| f * v).collect()
    }

    /// Initial funnel level `phi(0) |E0 - y_ref(0)|`, if in funnel mode.
    pub fn initial_funnel_level(&self) -> Option<f64> {
        let spec = self.controller.funnel_spec()?;
        let r = self.controller.reference()?.eval(0.0, self.dim());
        let e: f64 = self.mean0.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        Some(spec.phi.eval(0.0) * e)
    }

    /// Tensor grid used for spectral snapshots and density minima.
    pub fn snapshot_grid(&self) -> Vec<f64> {
        let n = self.dim();
        let m = self.config.grid_points();
        let l = self.config.grid_half_width();
        let axis: Vec<f64> = (0..m).map(|i| -l + i as f64 * (2.0 * l / (m - 1) as f64)).collect();
        let total = m.pow(n as u32);
        let mut pts = Vec::with_capacity(total * n);
        for flat in 0..total {
            let mut rem = flat;
            let mut coords = [0.0; crate::model::MAX_DIM];
            for k in (0..n).rev() {
                coords[k] = axis[rem % m];
                rem /= m;
            }
            pts.extend_from_slice(&coords[..n]);
        }
        pts
    }

    pub fn run(&self, backend: Backend) -> Result<RunRecord> {
        match backend {
            Backend::Spectral => self.run_spectral(),
            Backend::Fd => self.run_fd(),
            Backend::Ode => self.run_ode(),
        }
    }

    fn meta(&self, backend: Backend, parameters: BTreeMap<String, serde_json::Value>) -> RunMeta {
        RunMeta {
            format_version: FORMAT_VERSION,
            scenario: self.config.name.clone(),
            backend,
            stamp: self.config.stamp(),
            dimension: self.dim(),
            parameters,
            diagnostics: BTreeMap::new(),
            config: serde_json::to_value(&self.config).expect("config serializes"),
            snapshots: Vec::new(),
        }
    }

    /// Snapshot times snapped to multiples of `dt`, as step indices.
    fn snapshot_steps(&self, dt: f64, steps: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .config
            .snapshot_times()
            .iter()
            .map(|t| (t / dt).round() as usize)
            .filter(|&i| i <= steps)
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }

    pub fn spectral_solver(&self) -> Result<SpectralSolver> {
        SpectralSolver::new(
            self.model.clone(),
            self.config.model.g.clone(),
            self.config.spectral_order(),
            self.disturbance().clone(),
            &self.rule,
        )
    }

    fn run_spectral(&self) -> Result<RunRecord> {
        let s = &self.config.solver;
        let solver = self.spectral_solver()?;
        solver.check_stability(s.dt)?;
        let mut state: SpectralState = solver.project_initial(&self.density, &self.rule)?;
        let grid = self.snapshot_grid();
        let sampler = solver.sampler(&grid);
        let steps = step_count(s.horizon, s.dt)?;
        let snap_steps = self.snapshot_steps(s.dt, steps);
        let dim = self.dim();
        let mut series = Series::new(dim);
        let mut snapshots = Vec::new();
        let mut entries = Vec::new();
        let mut rk = Rk4::new(state.beta.len());
        let mut values = vec![0.0; sampler.points()];
        let mut tail_max: f64 = 0.0;
        let mut next_snap = 0;
        let mut rows = 0usize;
        for step in 0..=steps {
            let t = step as f64 * s.dt;
            state.t = t;
            let is_snap = snap_steps.get(next_snap) == Some(&step);
            if is_snap {
                sampler.eval(&state.beta, &mut values);
                entries.push(SnapshotEntry {
                    t,
                    file: snapshot_file_name(t),
                });
                snapshots.push(Snapshot {
                    t,
                    dim,
                    points: grid.clone(),
                    values: values.clone(),
                });
                next_snap += 1;
            }
            if step % s.record_every == 0 || step == steps {
                let mean = solver.mean(&state.beta);
                let sample = self.controller.evaluate(t, &mean)?;
                let moments = solver.moments(&state.beta);
                let cov = match &moments.covariance {
                    Some(c) => upper_triangle(c),
                    None => vec![f64::NAN; cov_len(dim)],
                };
                let min_density = if is_snap {
                    values.iter().copied().fold(f64::INFINITY, f64::min)
                } else if rows.is_multiple_of(s.density_every) {
                    sampler.min(&state.beta)
                } else {
                    f64::NAN
                };
                tail_max = tail_max.max(solver.tail_energy(&state.beta));
                series.push(Row {
                    t,
                    y: moments.mean,
                    u: sample.u,
                    e: sample.e,
                    funnel: sample.level,
                    margin: sample.margin,
                    mass: moments.mass,
                    cov,
                    h_norm: solver.h_norm(&state.beta),
                    min_density,
                });
                rows += 1;
            }
            if step == steps {
                break;
            }
            solver.step(&mut state, &self.controller, s.dt, &mut rk)?;
        }
        let mut params = BTreeMap::new();
        params.insert("order".into(), json!(self.config.spectral_order()));
        params.insert("basis_size".into(), json!(solver.basis().len()));
        params.insert("dt".into(), json!(s.dt));
        params.insert("record_every".into(), json!(s.record_every));
        params.insert("grid_points".into(), json!(self.config.grid_points()));
        params.insert("grid_half_width".into(), json!(self.config.grid_half_width()));
        let mut meta = self.meta(Backend::Spectral, params);
        meta.diagnostics.insert("tail_energy_max".into(), tail_max);
        meta.diagnostics
            .insert("tail_energy_final".into(), solver.tail_energy(&state.beta));
        meta.snapshots = entries;
        Ok(RunRecord {
            meta,
            series,
            snapshots,
        })
    }

    pub fn fd_solver(&self) -> Result<FdSolver> {
        let fd = &self.config.solver.fd;
        FdSolver::new(
            &self.model,
            self.config.model.g.clone(),
            self.disturbance().clone(),
            fd.half_width,
            fd.points,
        )
    }

    fn run_fd(&self) -> Result<RunRecord> {
        let s = &self.config.solver;
        let dt = s.fd.dt;
        let solver = self.fd_solver()?;
        solver.check_cfl(dt)?;
        let record_dt = s.dt * s.record_every as f64;
        let ratio = record_dt / dt;
        let stride = ratio.round() as usize;
        if stride == 0 || (ratio - stride as f64).abs() > 1e-9 * ratio {
            return Err(Error::config(
                "solver.fd.dt",
                format!("fd step {dt} must divide the recording interval {record_dt}"),
            ));
        }
        let steps = step_count(s.horizon, dt)?;
        let snap_steps = self.snapshot_steps(dt, steps);
        let mut state = solver.project(&self.density);
        let mut series = Series::new(1);
        let mut snapshots = Vec::new();
        let mut entries = Vec::new();
        let mut rk = Rk4::new(state.p.len());
        let mut next_snap = 0;
        for step in 0..=steps {
            let t = step as f64 * dt;
            state.t = t;
            if snap_steps.get(next_snap) == Some(&step) {
                entries.push(SnapshotEntry {
                    t,
                    file: snapshot_file_name(t),
                });
                snapshots.push(Snapshot {
                    t,
                    dim: 1,
                    points: solver.grid().to_vec(),
                    values: state.p.clone(),
                });
                next_snap += 1;
            }
            if step % stride == 0 || step == steps {
                let m = solver.moments(&state.p);
                let sample = self.controller.evaluate(t, &[solver.mean(&state.p)])?;
                // same expression as the spectral row times, so grids match bitwise
                let t_row = if step % stride == 0 {
                    ((step / stride) * s.record_every) as f64 * s.dt
                } else {
                    t
                };
                series.push(Row {
                    t: t_row,
                    y: vec![m.mean],
                    u: sample.u,
                    e: sample.e,
                    funnel: sample.level,
                    margin: sample.margin,
                    mass: m.mass,
                    cov: vec![m.variance],
                    h_norm: solver.h_norm(&state.p),
                    min_density: solver.min_density(&state.p),
                });
            }
            if step == steps {
                break;
            }
            solver.step(&mut state, &self.controller, dt, &mut rk)?;
        }
        let mut params = BTreeMap::new();
        params.insert("points".into(), json!(s.fd.points));
        params.insert("half_width".into(), json!(s.fd.half_width));
        params.insert("spacing".into(), json!(solver.spacing()));
        params.insert("dt".into(), json!(dt));
        params.insert("record_every".into(), json!(stride));
        let mut meta = self.meta(Backend::Fd, params);
        meta.snapshots = entries;
        Ok(RunRecord {
            meta,
            series,
            snapshots,
        })
    }

    fn run_ode(&self) -> Result<RunRecord> {
        let s = &self.config.solver;
        let d = &self.config.disturbance;
        if !d.shape.is_none() && !d.zero_mass {
            return Err(Error::Inapplicable(
                "the mean ODE holds only for zero-mass disturbances (set disturbance.zero_mass)".into(),
            ));
        }
        let dbar = |t: f64| self.disturbance_mean(t);
        let ode = MeanOde {
            model: &self.model,
            g: &self.config.model.g,
            mass: self.mass0,
            mean0: self.mean0.clone(),
            disturbance_mean: &dbar,
        };
        let traj = mean_ode_closed_loop(&self.controller, &ode, s.horizon, s.dt, s.record_every)?;
        let dim = self.dim();
        let mut series = Series::new(dim);
        let steps = step_count(s.horizon, s.dt)?;
        for (k, (y, sample)) in traj.y.into_iter().zip(traj.samples).enumerate() {
            let step = (k * s.record_every).min(steps);
            series.push(Row {
                t: step as f64 * s.dt,
                y,
                u: sample.u,
                e: sample.e,
                funnel: sample.level,
                margin: sample.margin,
                mass: self.mass0,
                cov: vec![f64::NAN; cov_len(dim)],
                h_norm: f64::NAN,
                min_density: f64::NAN,
            });
        }
        let mut params = BTreeMap::new();
        params.insert("dt".into(), json!(s.dt));
        params.insert("record_every".into(), json!(s.record_every));
        Ok(RunRecord {
            meta: self.meta(Backend::Ode, params),
            series,
            snapshots: Vec::new(),
        })
    }
}

fn upper_triangle(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(cov_len(n));
    for i in 0..n {
        for j in i..n {
            out.push(m[(i, j)]);
        }
    }
    out
}
