//! Classical fourth-order Runge-Kutta stepping for method-of-lines systems.

use crate::error::{Error, Result};

/// Scratch buffers reused across steps.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Rk4 {
    pub fn new(len: usize) -> Self {
        Self {
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            stage: vec![0.0; len],
        }
    }

    /// Advances `x` from `t` to `t + dt`. `f(t, x, dxdt)` may fail, e.g. when
    /// a stage state leaves the funnel.
    pub fn step<F>(&mut self, t: f64, dt: f64, x: &mut [f64], mut f: F) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        let half = 0.5 * dt;
        f(t, x, &mut self.k1)?;
        for i in 0..x.len() {
            self.stage[i] = x[i] + half * self.k1[i];
        }
        f(t + half, &self.stage, &mut self.k2)?;
        for i in 0..x.len() {
            self.stage[i] = x[i] + half * self.k2[i];
        }
        f(t + half, &self.stage, &mut self.k3)?;
        for i in 0..x.len() {
            self.stage[i] = x[i] + dt * self.k3[i];
        }
        f(t + dt, &self.stage, &mut self.k4)?;
        let sixth = dt / 6.0;
        for i in 0..x.len() {
            x[i] += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("state after step at t = {t}")));
        }
        Ok(())
    }
}

/// Number of steps of size `dt` covering `[0, horizon]`; the ratio must be an
/// integer up to rounding.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::config("solver.dt", format!("time step must be positive, got {dt}")));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::config("solver.horizon", format!("horizon must be positive, got {horizon}")));
    }
    let ratio = horizon / dt;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 * ratio.max(1.0) || n < 1.0 {
        return Err(Error::config(
            "solver.dt",
            format!("horizon {horizon} is not an integer multiple of dt {dt}"),
        ));
    }
    Ok(n as usize)
}
