//! Gauss rules used throughout the crate.
//!
//! [`QuadratureRule`] is the tensor Gauss–Hermite rule for integrals against
//! `exp(-|y|^2)`; it realizes the weighted inner product once the spatial
//! variable is mapped onto the Hermite coordinates `y_k = u_k . x`.
//! [`BoxRule`] is a composite Gauss–Legendre rule on a truncated box for
//! integrands that carry no Gaussian weight (initial densities, disturbances),
//! with optional breakpoints so piecewise-smooth integrands are integrated
//! panel by panel.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Nodes and weights of the `m`-point Gauss–Hermite rule for weight `exp(-y^2)`,
/// sorted ascending.
pub fn gauss_hermite(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m > 0, "Gauss-Hermite rule needs at least one node");
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let half = m.div_ceil(2);
    let nf = m as f64;
    let mut z = 0.0_f64;
    for i in 0..half {
        // asymptotic initial guesses for the largest roots, then extrapolation
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, dp) = normalized_hermite_with_derivative(m, z, pim4);
            pp = dp;
            let z1 = z;
            z = z1 - p / pp;
            if (z - z1).abs() <= NEWTON_TOL * z.abs().max(1.0) {
                let (_, dp) = normalized_hermite_with_derivative(m, z, pim4);
                pp = dp;
                break;
            }
        }
        x[i] = z;
        x[m - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[m - 1 - i] = w[i];
    }
    // the loop produced descending nodes; flip to ascending
    x.reverse();
    w.reverse();
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    (x, w)
}

fn normalized_hermite_with_derivative(m: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 0..m {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, (2.0 * m as f64).sqrt() * p2)
}

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[-1, 1]`, ascending.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m > 0, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let nf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..NEWTON_MAX_ITER {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..m {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= NEWTON_TOL {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[m - 1 - i] = w[i];
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    (x, w)
}

/// Tensor Gauss–Hermite rule: `m` nodes per axis over `dim` axes, weight
/// `exp(-|y|^2)`. Exact for polynomials of degree `<= 2m - 1` in each variable.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    dim: usize,
    nodes_per_axis: usize,
    axis_nodes: Vec<f64>,
    axis_weights: Vec<f64>,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(dim: usize, nodes_per_axis: usize) -> Self {
        assert!(dim >= 1, "quadrature dimension must be positive");
        let (axis_nodes, axis_weights) = gauss_hermite(nodes_per_axis);
        let (points, weights) = tensorize(dim, &axis_nodes, &axis_weights);
        Self {
            dim,
            nodes_per_axis,
            axis_nodes,
            axis_weights,
            points,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    /// Highest per-variable polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        2 * self.nodes_per_axis - 1
    }

    /// Errors unless polynomials of degree `degree` are integrated exactly.
    pub fn require_degree(&self, degree: usize) -> Result<()> {
        if degree > self.exact_degree() {
            return Err(Error::InsufficientQuadrature {
                nodes: self.nodes_per_axis,
                exact: self.exact_degree(),
                needed: degree,
            });
        }
        Ok(())
    }

    pub fn axis_nodes(&self) -> &[f64] {
        &self.axis_nodes
    }

    pub fn axis_weights(&self) -> &[f64] {
        &self.axis_weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Iterates `(y, weight)` over all tensor nodes.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }

    /// `sum_i w_i f(y_i)`, the rule applied to `exp(-|y|^2) f(y)`.
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.iter().map(|(y, w)| w * f(y)).sum()
    }
}

/// One axis of a composite Gauss–Legendre rule.
#[derive(Debug, Clone)]
pub struct LineRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LineRule {
    /// `panels` equal panels on `[lo, hi]`, each further split at any
    /// breakpoint that falls inside it, `order` Legendre nodes per piece.
    pub fn composite(lo: f64, hi: f64, panels: usize, order: usize, breakpoints: &[f64]) -> Self {
        assert!(hi > lo && panels > 0 && order > 0);
        let mut edges: Vec<f64> = (0..=panels)
            .map(|i| lo + (hi - lo) * i as f64 / panels as f64)
            .collect();
        edges.extend(breakpoints.iter().copied().filter(|b| *b > lo && *b < hi));
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let (gx, gw) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity((edges.len() - 1) * order);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(mid + half * x);
                weights.push(half * w);
            }
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }
}

/// Tensor composite Gauss–Legendre rule on `[-L, L]^dim` with unit weight.
#[derive(Debug, Clone)]
pub struct BoxRule {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl BoxRule {
    pub const DEFAULT_HALF_WIDTH: f64 = 8.0;

    /// `breakpoints[k]` lists the discontinuity locations along axis `k`.
    pub fn new(dim: usize, half_width: f64, panels: usize, order: usize, breakpoints: &[Vec<f64>]) -> Self {
        let axes: Vec<LineRule> = (0..dim)
            .map(|k| {
                let bp = breakpoints.get(k).map(Vec::as_slice).unwrap_or(&[]);
                LineRule::composite(-half_width, half_width, panels, order, bp)
            })
            .collect();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut idx = vec![0usize; dim];
        'outer: loop {
            let mut w = 1.0;
            for (k, &i) in idx.iter().enumerate() {
                points.push(axes[k].nodes[i]);
                w *= axes[k].weights[i];
            }
            weights.push(w);
            for k in (0..dim).rev() {
                idx[k] += 1;
                if idx[k] < axes[k].nodes.len() {
                    continue 'outer;
                }
                idx[k] = 0;
            }
            break;
        }
        Self {
            dim,
            points,
            weights,
        }
    }

    /// Default resolution used for projections on `[-8, 8]^n`.
    pub fn for_projection(dim: usize, breakpoints: &[Vec<f64>]) -> Self {
        Self::covering(dim, Self::DEFAULT_HALF_WIDTH, breakpoints)
    }

    /// Panels of width 1/8 (1D), 1/3 (2D) or 1 (3D) over `[-half_width, half_width]^n`;
    /// coarser in higher dimensions to keep the tensor size bounded.
    pub fn covering(dim: usize, half_width: f64, breakpoints: &[Vec<f64>]) -> Self {
        let (per_unit, order) = match dim {
            1 => (8.0, 10),
            2 => (3.0, 8),
            _ => (1.0, 8),
        };
        let panels = (2.0 * half_width * per_unit).ceil().max(1.0) as usize;
        Self::new(dim, half_width, panels, order, breakpoints)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

fn tensorize(dim: usize, nodes: &[f64], weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = nodes.len();
    let total = m.pow(dim as u32);
    let mut points = Vec::with_capacity(total * dim);
    let mut ws = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut w = 1.0;
        let start = points.len();
        points.resize(start + dim, 0.0);
        for k in (0..dim).rev() {
            let i = rem % m;
            rem /= m;
            points[start + k] = nodes[i];
            w *= weights[i];
        }
        ws.push(w);
    }
    (points, ws)
}
