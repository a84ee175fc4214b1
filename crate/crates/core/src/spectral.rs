//! Galerkin solver on the weighted Hermite basis `w_alpha = exp(-phi) H_alpha / c_alpha`.
//!
//! With `p = sum beta_alpha w_alpha` the equation becomes
//!
//! ```text
//! beta_alpha' = -c lambda_alpha beta_alpha
//!             + sum_j sqrt(2 alpha_j) (g(u) . u_j) beta_{alpha - e_j}
//!             + <d(t), w_alpha>
//! ```
//!
//! The coupling only lowers indices, so truncating at `|alpha| <= k` leaves
//! the retained coefficients exact.

use nalgebra::DMatrix;

use crate::control::{Controller, LoopSample};
use crate::density::Density;
use crate::error::{Error, Result};
use crate::hermite::{BasisTable, MultiIndex};
use crate::model::{Disturbance, Nonlinearity, OuModel};
use crate::ode::Rk4;
use crate::quadrature::BoxRule;

/// RK4 is stable for `dt * c * lambda_max` below this (real-axis limit ~2.785).
pub const STABILITY_LIMIT: f64 = 2.78;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub t: f64,
    /// Coefficients in basis order.
    pub beta: Vec<f64>,
}

/// Mass, mean and (for order >= 2) covariance `int (x - y)(x - y)^T p dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mass: f64,
    pub mean: Vec<f64>,
    pub covariance: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct SpectralSolver {
    model: OuModel,
    g: Nonlinearity,
    basis: BasisTable,
    decay: Vec<f64>,
    /// `(sqrt(2 alpha_j), ordinal of alpha - e_j)` per `(alpha, j)`, or `None`.
    raising: Vec<Option<(f64, usize)>>,
    disturbance: Disturbance,
    /// `int profile(x) H_alpha(x) / c_alpha dx`.
    disturbance_coeffs: Vec<f64>,
    first: Vec<usize>,
    second: Vec<Vec<usize>>,
}

impl SpectralSolver {
    /// Builds the basis of order `order` and projects the spatial profile of
    /// `disturbance` once with `rule`.
    pub fn new(
        model: OuModel,
        g: Nonlinearity,
        order: usize,
        disturbance: Disturbance,
        rule: &BoxRule,
    ) -> Result<Self> {
        if order == 0 {
            return Err(Error::config("solver.spectral.order", "order must be at least 1"));
        }
        let basis = BasisTable::new(&model, order);
        let dim = model.dim();
        let decay = basis.eigenvalues().iter().map(|l| model.c() * l).collect();
        let mut raising = Vec::with_capacity(basis.len() * dim);
        for (a, alpha) in basis.indices().iter().enumerate() {
            for j in 0..dim {
                raising.push(
                    basis
                        .lowered(a, j)
                        .map(|b| ((2.0 * alpha.entries()[j] as f64).sqrt(), b)),
                );
            }
        }
        let first = (0..dim)
            .map(|k| basis.position(&MultiIndex::unit(dim, k)).expect("order >= 1"))
            .collect();
        let second = if order >= 2 {
            (0..dim)
                .map(|k| {
                    (0..dim)
                        .map(|l| {
                            let idx = MultiIndex::unit(dim, k).plus(&MultiIndex::unit(dim, l));
                            basis.position(&idx).expect("order >= 2")
                        })
                        .collect()
                })
                .collect()
        } else {
            Vec::new()
        };
        let mut solver = Self {
            model,
            g,
            basis,
            decay,
            raising,
            disturbance,
            disturbance_coeffs: Vec::new(),
            first,
            second,
        };
        solver.disturbance_coeffs = if solver.disturbance.is_none() {
            vec![0.0; solver.basis.len()]
        } else {
            let d = solver.disturbance.clone();
            solver.project(|x| d.profile(x), rule)?
        };
        Ok(solver)
    }

    pub fn model(&self) -> &OuModel {
        &self.model
    }

    pub fn basis(&self) -> &BasisTable {
        &self.basis
    }

    pub fn disturbance(&self) -> &Disturbance {
        &self.disturbance
    }

    /// `<f, w_alpha>_h = int f H_alpha / c_alpha dx`; the weights `exp(phi)` of
    /// the inner product and `exp(-phi)` of `w_alpha` cancel.
    pub fn project(&self, f: impl Fn(&[f64]) -> f64, rule: &BoxRule) -> Result<Vec<f64>> {
        let len = self.basis.len();
        let mut out = vec![0.0; len];
        let mut vals = vec![0.0; len];
        for (x, w) in rule.iter() {
            let fx = f(x);
            if fx == 0.0 {
                continue;
            }
            self.basis.scaled_hermite_all(&self.model, x, &mut vals);
            let wf = w * fx;
            for (o, v) in out.iter_mut().zip(&vals) {
                *o += wf * v;
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("projection onto the Hermite basis".into()));
        }
        Ok(out)
    }

    pub fn project_initial(&self, p0: &Density, rule: &BoxRule) -> Result<SpectralState> {
        Ok(SpectralState {
            t: 0.0,
            beta: self.project(|x| p0.eval(x), rule)?,
        })
    }

    /// Rejects `dt` beyond the RK4 stability bound and returns the largest
    /// allowed step.
    pub fn check_stability(&self, dt: f64) -> Result<f64> {
        let stiff = self.model.c() * self.basis.max_eigenvalue();
        let limit = if stiff > 0.0 { STABILITY_LIMIT / stiff } else { f64::INFINITY };
        if dt > limit {
            return Err(Error::Unstable { dt, suggested: limit });
        }
        Ok(limit)
    }

    /// Coefficient derivative for input image `gu = g(u)` at time `t`.
    pub fn rhs(&self, t: f64, beta: &[f64], gu: &[f64], out: &mut [f64]) {
        let dim = self.model.dim();
        let uv = self.model.u_vectors();
        let mut coupling = [0.0; crate::model::MAX_DIM];
        for (j, cj) in coupling.iter_mut().enumerate().take(dim) {
            *cj = (0..dim).map(|i| gu[i] * uv[(i, j)]).sum();
        }
        let tf = self.disturbance.time_factor(t);
        for a in 0..beta.len() {
            let mut acc = -self.decay[a] * beta[a] + tf * self.disturbance_coeffs[a];
            for j in 0..dim {
                if let Some((s, b)) = self.raising[a * dim + j] {
                    acc += s * coupling[j] * beta[b];
                }
            }
            out[a] = acc;
        }
    }

    /// `P0 = c_0 beta_0`.
    pub fn mass(&self, beta: &[f64]) -> f64 {
        self.basis.c(0) * beta[0]
    }

    /// `y = F mu^1 / 2` with `mu^1_k = c_{e_k} beta_{e_k}`.
    pub fn mean(&self, beta: &[f64]) -> Vec<f64> {
        let dim = self.model.dim();
        let f = self.model.f_matrix();
        let mu: Vec<f64> = self.first.iter().map(|&a| self.basis.c(a) * beta[a]).collect();
        (0..dim)
            .map(|i| 0.5 * (0..dim).map(|k| f[(i, k)] * mu[k]).sum::<f64>())
            .collect()
    }

    pub fn moments(&self, beta: &[f64]) -> Moments {
        let mass = self.mass(beta);
        let mean = self.mean(beta);
        let covariance = if self.second.is_empty() {
            None
        } else {
            let dim = self.model.dim();
            // E[y y^T] in Hermite coordinates from H_{2e_k} = 4 y_k^2 - 2 and H_{e_k + e_l} = 4 y_k y_l.
            let mut m = DMatrix::zeros(dim, dim);
            for k in 0..dim {
                for l in 0..dim {
                    let a = self.second[k][l];
                    m[(k, l)] = self.basis.c(a) * beta[a];
                }
                m[(k, k)] += 2.0 * mass;
            }
            let f = self.model.f_matrix();
            let second_moment = f * (m * 0.25) * f.transpose();
            let y = nalgebra::DVector::from_column_slice(&mean);
            Some(second_moment - (2.0 - mass) * &y * y.transpose())
        };
        Moments {
            mass,
            mean,
            covariance,
        }
    }

    /// `||p||_h = |beta|` (orthonormal basis).
    pub fn h_norm(&self, beta: &[f64]) -> f64 {
        beta.iter().map(|b| b * b).sum::<f64>().sqrt()
    }

    /// `sum_{|alpha| = k} beta_alpha^2`, a truncation diagnostic.
    pub fn tail_energy(&self, beta: &[f64]) -> f64 {
        let k = self.basis.order();
        self.basis
            .indices()
            .iter()
            .zip(beta)
            .filter(|(a, _)| a.order() == k)
            .map(|(_, b)| b * b)
            .sum()
    }

    /// `p(x) = sum beta_alpha w_alpha(x)` at flattened points.
    pub fn reconstruct(&self, beta: &[f64], points: &[f64]) -> Vec<f64> {
        let dim = self.model.dim();
        let mut vals = vec![0.0; self.basis.len()];
        points
            .chunks_exact(dim)
            .map(|x| {
                self.basis.weighted_all(&self.model, x, &mut vals);
                vals.iter().zip(beta).map(|(v, b)| v * b).sum()
            })
            .collect()
    }

    /// Precomputes `w_alpha` on a fixed point set for repeated reconstruction.
    pub fn sampler(&self, points: &[f64]) -> Sampler {
        let dim = self.model.dim();
        let len = self.basis.len();
        let mut table = Vec::with_capacity(points.len() / dim * len);
        let mut vals = vec![0.0; len];
        for x in points.chunks_exact(dim) {
            self.basis.weighted_all(&self.model, x, &mut vals);
            table.extend_from_slice(&vals);
        }
        Sampler { len, table }
    }

    /// Advances `state` by one RK4 step with the controller evaluated at every
    /// stage; returns the controller sample at the start of the step.
    pub fn step(&self, state: &mut SpectralState, controller: &Controller, dt: f64, rk: &mut Rk4) -> Result<LoopSample> {
        let start = controller.evaluate(state.t, &self.mean(&state.beta))?;
        let mut first = true;
        rk.step(state.t, dt, &mut state.beta, |t, beta, out| {
            let u = if first {
                first = false;
                start.u.clone()
            } else {
                controller.evaluate(t, &self.mean(beta))?.u
            };
            let gu = self.g.apply(&u);
            self.rhs(t, beta, &gu, out);
            Ok(())
        })?;
        state.t += dt;
        Ok(start)
    }
}

/// Basis values cached on a point set.
#[derive(Debug, Clone)]
pub struct Sampler {
    len: usize,
    table: Vec<f64>,
}

impl Sampler {
    pub fn points(&self) -> usize {
        self.table.len() / self.len
    }

    pub fn eval(&self, beta: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.table.chunks_exact(self.len)) {
            *o = row.iter().zip(beta).map(|(v, b)| v * b).sum();
        }
    }

    pub fn min(&self, beta: &[f64]) -> f64 {
        self.table
            .chunks_exact(self.len)
            .map(|row| row.iter().zip(beta).map(|(v, b)| v * b).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }
}
