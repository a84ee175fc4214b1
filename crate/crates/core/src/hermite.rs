//! Multi-index Hermite machinery: polynomial evaluation, the weighted
//! eigenbasis `w_alpha = exp(-phi) H_alpha / c_alpha`, and its bookkeeping.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::model::OuModel;
use crate::quadrature::QuadratureRule;

const LN_PI: f64 = 1.144_729_885_849_400_2;

/// Physicists' Hermite polynomial `H_degree(x)` via `H_{n+1} = 2x H_n - 2n H_{n-1}`.
pub fn hermite_eval(degree: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for n in 0..degree {
        let next = 2.0 * x * cur - 2.0 * n as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[n] = H_n(y) / sqrt(sqrt(pi) 2^n n!)` for `n < out.len()`.
/// The normalized recurrence avoids the factorial growth of `H_n`.
pub fn hermite_normalized_all(y: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = (-0.25 * LN_PI).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * y * out[0];
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * y * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
}

/// `ln(sqrt(pi) 2^n n!)`, the log of the squared 1D Hermite norm.
pub fn log_hermite_norm_sq(n: usize) -> f64 {
    0.5 * LN_PI + n as f64 * std::f64::consts::LN_2 + (2..=n).map(|k| (k as f64).ln()).sum::<f64>()
}

/// Quadrature value of `int exp(-x^2) H_n H_m dx`; the rule must integrate
/// degree `n + m` exactly.
pub fn hermite_orthogonality(n: usize, m: usize, rule: &QuadratureRule) -> Result<f64> {
    rule.require_degree(n + m)?;
    Ok(rule
        .axis_nodes()
        .iter()
        .zip(rule.axis_weights())
        .map(|(&x, &w)| w * hermite_eval(n, x) * hermite_eval(m, x))
        .sum())
}

/// A multi-index `alpha in N_0^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Self {
        Self(entries)
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    /// `e_k`.
    pub fn unit(dim: usize, k: usize) -> Self {
        let mut e = vec![0; dim];
        e[k] = 1;
        Self(e)
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|alpha|`.
    pub fn order(&self) -> usize {
        self.0.iter().sum()
    }

    /// `alpha^{-i}`; `None` when `alpha_i = 0` (the coefficient is then zero).
    pub fn lower(&self, i: usize) -> Option<MultiIndex> {
        if self.0[i] == 0 {
            return None;
        }
        let mut e = self.0.clone();
        e[i] -= 1;
        Some(Self(e))
    }

    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// All multi-indices of order `<= k` in graded lexicographic order, with
/// eigenvalues, log-normalization constants and the lowering lookup.
#[derive(Debug, Clone)]
pub struct BasisTable {
    dim: usize,
    order: usize,
    indices: Vec<MultiIndex>,
    position: HashMap<MultiIndex, usize>,
    /// `lowered[a * dim + j]` is the ordinal of `alpha_a^{-j}`.
    lowered: Vec<Option<usize>>,
    eigenvalues: Vec<f64>,
    log_c: Vec<f64>,
    half_log_det_u: f64,
}

impl BasisTable {
    pub fn new(model: &OuModel, order: usize) -> Self {
        let dim = model.dim();
        let indices = graded_indices(dim, order);
        let position: HashMap<MultiIndex, usize> =
            indices.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        let mut lowered = Vec::with_capacity(indices.len() * dim);
        for alpha in &indices {
            for j in 0..dim {
                lowered.push(alpha.lower(j).map(|b| position[&b]));
            }
        }
        let lambdas = model.lambdas();
        let eigenvalues = indices
            .iter()
            .map(|a| a.entries().iter().zip(lambdas).map(|(&k, l)| k as f64 * l).sum())
            .collect();
        // c_alpha^2 = |det U|^{-1} prod_k sqrt(pi) 2^{alpha_k} alpha_k!
        let log_c = indices
            .iter()
            .map(|a| {
                0.5 * (a.entries().iter().map(|&k| log_hermite_norm_sq(k)).sum::<f64>() - model.log_det_u())
            })
            .collect();
        Self {
            dim,
            order,
            indices,
            position,
            lowered,
            eigenvalues,
            log_c,
            half_log_det_u: 0.5 * model.log_det_u(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.position.get(alpha).copied()
    }

    /// Ordinal of `alpha_a^{-j}`, if it exists.
    pub fn lowered(&self, a: usize, j: usize) -> Option<usize> {
        self.lowered[a * self.dim + j]
    }

    /// `lambda_alpha = sum_k alpha_k lambda_k`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(0.0, f64::max)
    }

    pub fn log_c(&self, a: usize) -> f64 {
        self.log_c[a]
    }

    /// `c_alpha = ||exp(-phi) H_alpha||`; may overflow for very large orders,
    /// prefer [`Self::c_ratio`] or [`Self::log_c`] there.
    pub fn c(&self, a: usize) -> f64 {
        self.log_c[a].exp()
    }

    pub fn c_ratio(&self, a: usize, b: usize) -> f64 {
        (self.log_c[a] - self.log_c[b]).exp()
    }

    /// Fills `out[a] = H_alpha(x) / c_alpha` for every basis index.
    pub fn scaled_hermite_all(&self, model: &OuModel, x: &[f64], out: &mut [f64]) {
        let mut y = [0.0; crate::model::MAX_DIM];
        model.to_hermite_coords(x, &mut y[..self.dim]);
        self.scaled_hermite_at_coords(&y[..self.dim], out);
    }

    /// Same as [`Self::scaled_hermite_all`] with Hermite coordinates given.
    pub fn scaled_hermite_at_coords(&self, y: &[f64], out: &mut [f64]) {
        let k = self.order + 1;
        let mut psi = vec![0.0; self.dim * k];
        for (axis, yk) in y.iter().enumerate() {
            hermite_normalized_all(*yk, &mut psi[axis * k..(axis + 1) * k]);
        }
        let scale = self.half_log_det_u.exp();
        for (slot, alpha) in out.iter_mut().zip(&self.indices) {
            let mut prod = scale;
            for (axis, &deg) in alpha.entries().iter().enumerate() {
                prod *= psi[axis * k + deg];
            }
            *slot = prod;
        }
    }

    /// Fills `out[a] = w_alpha(x)`.
    pub fn weighted_all(&self, model: &OuModel, x: &[f64], out: &mut [f64]) {
        let mut y = [0.0; crate::model::MAX_DIM];
        model.to_hermite_coords(x, &mut y[..self.dim]);
        let y = &y[..self.dim];
        self.scaled_hermite_at_coords(y, out);
        let damp = (-y.iter().map(|v| v * v).sum::<f64>()).exp();
        for v in out.iter_mut() {
            *v *= damp;
        }
    }

    /// Gram matrix `<w_alpha, w_beta>` by Gauss–Hermite quadrature.
    pub fn gram(&self, rule: &QuadratureRule) -> Result<DMatrix<f64>> {
        rule.require_degree(2 * self.order)?;
        let len = self.len();
        let mut gram = DMatrix::zeros(len, len);
        let mut vals = vec![0.0; len];
        let jac = (-2.0 * self.half_log_det_u).exp();
        for (y, w) in rule.iter() {
            self.scaled_hermite_at_coords(y, &mut vals);
            for a in 0..len {
                let wa = w * jac * vals[a];
                for b in a..len {
                    gram[(a, b)] += wa * vals[b];
                }
            }
        }
        for a in 0..len {
            for b in 0..a {
                gram[(a, b)] = gram[(b, a)];
            }
        }
        Ok(gram)
    }

    /// `c_alpha^2` recomputed by quadrature of `int exp(-phi) H_alpha^2 dx`.
    pub fn c_squared_by_quadrature(&self, model: &OuModel, a: usize, rule: &QuadratureRule) -> Result<f64> {
        rule.require_degree(2 * self.indices[a].order())?;
        let alpha = &self.indices[a];
        let mut y = vec![0.0; self.dim];
        Ok(model.weighted_integral(rule, |x| {
            model.to_hermite_coords(x, &mut y);
            let h: f64 = alpha
                .entries()
                .iter()
                .zip(&y)
                .map(|(&k, &yk)| hermite_eval(k, yk))
                .product();
            h * h
        }))
    }
}

/// Unnormalized eigenfunction `z_alpha(x) = exp(-phi(x)) prod_k H_{alpha_k}(u_k . x)`.
pub fn eigenfunction_eval(alpha: &MultiIndex, x: &[f64], model: &OuModel) -> f64 {
    let mut y = vec![0.0; model.dim()];
    model.to_hermite_coords(x, &mut y);
    let h: f64 = alpha
        .entries()
        .iter()
        .zip(&y)
        .map(|(&k, &yk)| hermite_eval(k, yk))
        .product();
    (-model.phi(x)).exp() * h
}

/// Every multi-index of order `<= k`, graded, lexicographically descending
/// within each order: for `n = 2, k = 1` this is `(0,0), (1,0), (0,1)`.
pub fn graded_indices(dim: usize, k: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for total in 0..=k {
        let mut buf = vec![0; dim];
        compositions(total, 0, &mut buf, &mut out);
    }
    out
}

fn compositions(remaining: usize, axis: usize, buf: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
    let dim = buf.len();
    if axis == dim - 1 {
        buf[axis] = remaining;
        out.push(MultiIndex(buf.clone()));
        return;
    }
    for a in (0..=remaining).rev() {
        buf[axis] = a;
        compositions(remaining - a, axis + 1, buf, out);
    }
}

/// `binomial(n + k, n)`, the number of multi-indices of order `<= k`.
pub fn basis_size(dim: usize, k: usize) -> usize {
    let mut acc: u128 = 1;
    for i in 1..=dim as u128 {
        acc = acc * (k as u128 + i) / i;
    }
    acc as usize
}
