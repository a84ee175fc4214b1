//! Method-of-lines finite differences for the one-dimensional equation on
//! `[-L, L]` with homogeneous Dirichlet ends:
//!
//! ```text
//! p_i' = c (p_{i+1} - 2 p_i + p_{i-1}) / h^2 + (q_{i+1} - q_{i-1}) / (2h) + d_i,
//! q_i  = p_i (Gamma x_i - g(u)).
//! ```

use crate::control::{Controller, LoopSample};
use crate::density::Density;
use crate::error::{Error, Result};
use crate::model::{Disturbance, Nonlinearity, OuModel};
use crate::ode::Rk4;
use crate::quadrature::gauss_legendre;

/// Fraction of the explicit diffusion limit `h^2 / (2c)` allowed per step.
pub const CFL_SAFETY: f64 = 0.9;
const CELL_ORDER: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub t: f64,
    /// Samples at the grid nodes; both end values stay 0.
    pub p: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FdSolver {
    c: f64,
    gamma: f64,
    g: Nonlinearity,
    disturbance: Disturbance,
    half_width: f64,
    h: f64,
    x: Vec<f64>,
    drift: Vec<f64>,
    profile: Vec<f64>,
    weight: Vec<f64>,
}

/// Trapezoid moments of a grid function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMoments {
    pub mass: f64,
    pub mean: f64,
    /// `int (x - mean)^2 p dx`.
    pub variance: f64,
}

impl FdSolver {
    pub fn new(model: &OuModel, g: Nonlinearity, disturbance: Disturbance, half_width: f64, points: usize) -> Result<Self> {
        if model.dim() != 1 {
            return Err(Error::config("solver.fd", "finite differences are one-dimensional only"));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::config("solver.fd.half_width", "half width must be positive"));
        }
        if points < 5 {
            return Err(Error::config("solver.fd.points", "need at least 5 grid points"));
        }
        let h = 2.0 * half_width / (points - 1) as f64;
        let x: Vec<f64> = (0..points).map(|i| -half_width + i as f64 * h).collect();
        let gamma = model.gamma()[(0, 0)];
        let phi_scale = gamma / (2.0 * model.c());
        Ok(Self {
            c: model.c(),
            gamma,
            drift: x.iter().map(|xi| gamma * xi).collect(),
            profile: x.iter().map(|xi| disturbance.profile(&[*xi])).collect(),
            weight: x.iter().map(|xi| (phi_scale * xi * xi).exp()).collect(),
            g,
            disturbance,
            half_width,
            h,
            x,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.x
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Largest admissible step `CFL_SAFETY * h^2 / (2c)`.
    pub fn max_dt(&self) -> f64 {
        CFL_SAFETY * self.h * self.h / (2.0 * self.c)
    }

    pub fn check_cfl(&self, dt: f64) -> Result<()> {
        let limit = self.max_dt();
        if dt > limit {
            return Err(Error::Cfl { dt, suggested: limit });
        }
        Ok(())
    }

    /// Point samples of `f` with the ends pinned to 0.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> GridState {
        let n = self.x.len();
        let mut p: Vec<f64> = self.x.iter().map(|&x| f(x)).collect();
        p[0] = 0.0;
        p[n - 1] = 0.0;
        GridState { t: 0.0, p }
    }

    /// Lumped hat-function projection `p_i = (1/h) int p0 hat_i dx`, which
    /// makes the trapezoid mass and mean equal those of `p0` on the domain.
    pub fn project(&self, p0: &Density) -> GridState {
        let (nodes, weights) = gauss_legendre(CELL_ORDER);
        let breaks: Vec<f64> = p0.breakpoints().first().cloned().unwrap_or_default();
        let n = self.x.len();
        let mut p = vec![0.0; n];
        for i in 0..n - 1 {
            let (a, b) = (self.x[i], self.x[i + 1]);
            let mut cuts = vec![a];
            cuts.extend(breaks.iter().copied().filter(|&z| z > a && z < b));
            cuts.push(b);
            let (mut left, mut right) = (0.0, 0.0);
            for w in cuts.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                let half = 0.5 * (hi - lo);
                let mid = 0.5 * (hi + lo);
                for (z, wt) in nodes.iter().zip(&weights) {
                    let xq = mid + half * z;
                    let v = wt * half * p0.eval(&[xq]);
                    left += v * (b - xq);
                    right += v * (xq - a);
                }
            }
            p[i] += left / (self.h * self.h);
            p[i + 1] += right / (self.h * self.h);
        }
        p[0] = 0.0;
        p[n - 1] = 0.0;
        GridState { t: 0.0, p }
    }

    /// Sample derivative for input image `gu = g(u)`.
    pub fn rhs(&self, t: f64, p: &[f64], gu: f64, out: &mut [f64]) {
        let n = p.len();
        let diff = self.c / (self.h * self.h);
        let adv = 0.5 / self.h;
        let tf = self.disturbance.time_factor(t);
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            let q_plus = p[i + 1] * (self.drift[i + 1] - gu);
            let q_minus = p[i - 1] * (self.drift[i - 1] - gu);
            out[i] = diff * (p[i + 1] - 2.0 * p[i] + p[i - 1]) + adv * (q_plus - q_minus) + tf * self.profile[i];
        }
    }

    pub fn moments(&self, p: &[f64]) -> GridMoments {
        let h = self.h;
        let n = p.len();
        let trap = |f: &dyn Fn(usize) -> f64| -> f64 {
            let mut s = 0.5 * (f(0) + f(n - 1));
            for i in 1..n - 1 {
                s += f(i);
            }
            h * s
        };
        let mass = trap(&|i| p[i]);
        let mean = trap(&|i| self.x[i] * p[i]);
        let second = trap(&|i| self.x[i] * self.x[i] * p[i]);
        GridMoments {
            mass,
            mean,
            variance: second - (2.0 - mass) * mean * mean,
        }
    }

    pub fn mean(&self, p: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 1..p.len() - 1 {
            s += self.x[i] * p[i];
        }
        self.h * s
    }

    /// Trapezoid approximation of `||p||_h = (int p^2 exp(phi))^{1/2}`.
    pub fn h_norm(&self, p: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 1..p.len() - 1 {
            s += p[i] * p[i] * self.weight[i];
        }
        (self.h * s).sqrt()
    }

    pub fn min_density(&self, p: &[f64]) -> f64 {
        p.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// One RK4 step with the controller evaluated at every stage; returns the
    /// controller sample at the start of the step.
    pub fn step(&self, state: &mut GridState, controller: &Controller, dt: f64, rk: &mut Rk4) -> Result<LoopSample> {
        let start = controller.evaluate(state.t, &[self.mean(&state.p)])?;
        let mut first = true;
        rk.step(state.t, dt, &mut state.p, |t, p, out| {
            let u = if first {
                first = false;
                start.u[0]
            } else {
                controller.evaluate(t, &[self.mean(p)])?.u[0]
            };
            let gu = self.g.apply(&[u])[0];
            self.rhs(t, p, gu, out);
            Ok(())
        })?;
        state.t += dt;
        Ok(start)
    }
}
