//! Checks on persisted run records: funnel margin, mass, positivity,
//! covariance law, boundedness, and cross-validation between records.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::model::OuModel;
use crate::record::{Backend, RunRecord, Series, Snapshot};

/// Records must have unit mass within this for the covariance law check.
pub const UNIT_MASS_TOL: f64 = 1e-6;
pub const FUNNEL_LIMIT: f64 = 1.0;
pub const SPECTRAL_MASS_TOL: f64 = 1e-10;
pub const FD_MASS_TOL: f64 = 1e-4;
pub const POSITIVITY_TOL: f64 = 1e-6;
pub const COVARIANCE_TOL: f64 = 1e-3;
pub const MEAN_GAP_TOL: f64 = 2e-3;
pub const SNAPSHOT_GAP_TOL: f64 = 5e-3;
/// Snapshot gaps are compared after the initial transient.
pub const SNAPSHOT_GAP_FROM: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunnelCheck {
    /// `max_t phi(t) |e(t)|`.
    pub eps_observed: f64,
    pub pass: bool,
    /// First recorded time with `phi |e| >= 1`.
    pub first_violation: Option<f64>,
}

pub fn check_funnel(series: &Series) -> FunnelCheck {
    let mut eps: f64 = 0.0;
    let mut first = None;
    for (t, level) in series.t.iter().zip(&series.funnel) {
        if level.is_nan() {
            continue;
        }
        eps = eps.max(*level);
        if *level >= FUNNEL_LIMIT && first.is_none() {
            first = Some(*t);
        }
    }
    FunnelCheck {
        eps_observed: eps,
        pass: first.is_none() && eps < FUNNEL_LIMIT,
        first_violation: first,
    }
}

/// `max_t |mass(t) - mass(0)|`.
pub fn mass_drift(series: &Series) -> f64 {
    let m0 = series.mass.first().copied().unwrap_or(f64::NAN);
    series.mass.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max)
}

/// Smallest recorded density value (rows without a value are skipped) and
/// the value in the first row.
pub fn density_minimum(series: &Series) -> (f64, f64) {
    let min = series
        .min_density
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::INFINITY, f64::min);
    (min, series.min_density.first().copied().unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Boundedness {
    pub initial: f64,
    pub max: f64,
    /// `sup ||p||_h` over the first and second halves of the run.
    pub first_half: f64,
    pub second_half: f64,
}

pub fn boundedness(series: &Series) -> Boundedness {
    let horizon = series.t.last().copied().unwrap_or(0.0);
    let (mut a, mut b): (f64, f64) = (0.0, 0.0);
    for (t, h) in series.t.iter().zip(&series.h_norm) {
        if *t <= 0.5 * horizon {
            a = a.max(*h);
        } else {
            b = b.max(*h);
        }
    }
    Boundedness {
        initial: series.h_norm.first().copied().unwrap_or(f64::NAN),
        max: a.max(b),
        first_half: a,
        second_half: b,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceCheck {
    /// `K = 4 R V^T Cov(0) V R - 2 I`.
    pub k: Vec<Vec<f64>>,
    /// `max_t |Cov(t) - prediction(t)|_F`.
    pub max_deviation: f64,
    /// `max_t |P(t) - exp(-c L t) P(0) exp(-c L t)|_F` with `P = 4 R V^T Cov V R - 2 I`.
    pub max_p_deviation: f64,
    pub final_covariance: Vec<Vec<f64>>,
}

/// `P = 4 R V^T Cov V R - 2 I`.
pub fn normalized_covariance(model: &OuModel, cov: &DMatrix<f64>) -> DMatrix<f64> {
    let n = model.dim();
    let vr = model.eigenvectors() * model.r_matrix();
    &vr.transpose() * cov * &vr * 4.0 - DMatrix::identity(n, n) * 2.0
}

/// `Cov(t) = V R^{-1} (exp(-c L t) K exp(-c L t) + 2 I) R^{-1} V^T / 4`.
pub fn predicted_covariance(model: &OuModel, k: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = model.dim();
    let decay = decay_matrix(model, t);
    let rinv = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, model.r_diag().iter().map(|r| 1.0 / r)));
    let vri = model.eigenvectors() * rinv;
    &vri * (&decay * k * &decay + DMatrix::identity(n, n) * 2.0) * vri.transpose() * 0.25
}

fn decay_matrix(model: &OuModel, t: f64) -> DMatrix<f64> {
    let n = model.dim();
    DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        model.lambdas().iter().map(|l| (-model.c() * l * t).exp()),
    ))
}

pub fn check_covariance_law(series: &Series, model: &OuModel) -> Result<CovarianceCheck> {
    if series.is_empty() {
        return Err(Error::Inapplicable("empty series".into()));
    }
    if let Some(m) = series.mass.iter().find(|m| (*m - 1.0).abs() > UNIT_MASS_TOL) {
        return Err(Error::Inapplicable(format!("mass {m} differs from 1")));
    }
    if series.cov.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::Inapplicable("record has no covariance".into()));
    }
    let cov0 = series.covariance(0);
    let k = normalized_covariance(model, &cov0);
    let t0 = series.t[0];
    let mut max_dev: f64 = 0.0;
    let mut max_p: f64 = 0.0;
    for r in 0..series.len() {
        let t = series.t[r] - t0;
        let cov = series.covariance(r);
        max_dev = max_dev.max((&cov - predicted_covariance(model, &k, t)).norm());
        let decay = decay_matrix(model, t);
        max_p = max_p.max((normalized_covariance(model, &cov) - &decay * &k * &decay).norm());
    }
    let to_rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    Ok(CovarianceCheck {
        k: to_rows(&k),
        max_deviation: max_dev,
        max_p_deviation: max_p,
        final_covariance: to_rows(&series.covariance(series.len() - 1)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotGap {
    pub t: f64,
    /// `(int (p_a - p_b)^2 dx)^{1/2}` on the first record's grid.
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossReport {
    pub scenario: String,
    pub backend_a: Backend,
    pub backend_b: Backend,
    /// `sup_t |y_a - y_b|` over common times.
    pub mean_gap: f64,
    /// `sup_t |mass_a - mass_b|`.
    pub mass_gap: f64,
    pub snapshot_gaps: Vec<SnapshotGap>,
    /// Largest snapshot gap at `t >= 0.5`, if any snapshots were compared.
    pub max_snapshot_gap_late: Option<f64>,
}

/// Compares two records of the same scenario. Series of `b` are linearly
/// interpolated onto the times of `a`; snapshots are matched by time and `b`
/// is linearly interpolated onto the grid of `a` (1D) or must share it.
pub fn cross_validate(a: &RunRecord, b: &RunRecord) -> Result<CrossReport> {
    if a.meta.stamp != b.meta.stamp {
        return Err(Error::ScenarioMismatch(format!(
            "`{}` ({}) vs `{}` ({})",
            a.meta.scenario, a.meta.backend, b.meta.scenario, b.meta.backend
        )));
    }
    let (sa, sb) = (&a.series, &b.series);
    let mut mean_gap: f64 = 0.0;
    let mut mass_gap: f64 = 0.0;
    for (r, &t) in sa.t.iter().enumerate() {
        let Some((i, w)) = bracket(&sb.t, t) else { continue };
        for k in 0..sa.dim {
            let yb = lerp(sb.y[i][k], sb.y[i + usize::from(w > 0.0)][k], w);
            mean_gap = mean_gap.max((sa.y[r][k] - yb).abs());
        }
        let mb = lerp(sb.mass[i], sb.mass[i + usize::from(w > 0.0)], w);
        mass_gap = mass_gap.max((sa.mass[r] - mb).abs());
    }
    let mut gaps = Vec::new();
    for snap_a in &a.snapshots {
        if let Some(snap_b) = b.snapshots.iter().find(|s| (s.t - snap_a.t).abs() < 1e-9) {
            gaps.push(SnapshotGap {
                t: snap_a.t,
                l2: snapshot_l2_gap(snap_a, snap_b)?,
            });
        }
    }
    let late = gaps
        .iter()
        .filter(|g| g.t >= SNAPSHOT_GAP_FROM - 1e-12)
        .map(|g| g.l2)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    Ok(CrossReport {
        scenario: a.meta.scenario.clone(),
        backend_a: a.meta.backend,
        backend_b: b.meta.backend,
        mean_gap,
        mass_gap,
        snapshot_gaps: gaps,
        max_snapshot_gap_late: late,
    })
}

/// Index `i` and weight `w` with `t = (1 - w) ts[i] + w ts[i + 1]`.
fn bracket(ts: &[f64], t: f64) -> Option<(usize, f64)> {
    let n = ts.len();
    if n == 0 || t < ts[0] - 1e-12 || t > ts[n - 1] + 1e-12 {
        return None;
    }
    let i = ts.partition_point(|&s| s <= t).saturating_sub(1).min(n - 1);
    if i == n - 1 || (ts[i] - t).abs() <= 1e-12 {
        return Some((i, 0.0));
    }
    Some((i, (t - ts[i]) / (ts[i + 1] - ts[i])))
}

fn lerp(a: f64, b: f64, w: f64) -> f64 {
    if w == 0.0 {
        a
    } else {
        a + w * (b - a)
    }
}

pub fn snapshot_l2_gap(a: &Snapshot, b: &Snapshot) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::ScenarioMismatch("snapshot dimensions differ".into()));
    }
    let same_grid = a.points.len() == b.points.len()
        && a.points.iter().zip(&b.points).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()));
    let diff: Vec<f64> = if same_grid {
        a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect()
    } else if a.dim == 1 {
        a.points
            .iter()
            .zip(&a.values)
            .map(|(x, v)| v - interp_1d(&b.points, &b.values, *x))
            .collect()
    } else {
        return Err(Error::Inapplicable("multi-dimensional snapshots need identical grids".into()));
    };
    Ok(grid_l2(&a.points, a.dim, &diff))
}

/// Linear interpolation, zero outside the grid.
fn interp_1d(xs: &[f64], vs: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if n == 0 || x < xs[0] || x > xs[n - 1] {
        return 0.0;
    }
    let i = xs.partition_point(|&s| s <= x).saturating_sub(1).min(n - 2);
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    vs[i] + w * (vs[i + 1] - vs[i])
}

/// Trapezoid L2 norm on a uniform tensor grid given as flattened points.
fn grid_l2(points: &[f64], dim: usize, f: &[f64]) -> f64 {
    let count = f.len();
    if count < 2 {
        return 0.0;
    }
    let per_axis = (count as f64).powf(1.0 / dim as f64).round() as usize;
    let mut cell = 1.0;
    for k in 0..dim {
        let (lo, hi) = points
            .iter()
            .skip(k)
            .step_by(dim)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
        cell *= (hi - lo) / (per_axis.max(2) - 1) as f64;
    }
    let mut sum = 0.0;
    for (idx, v) in f.iter().enumerate() {
        let mut w = 1.0;
        let mut rem = idx;
        for _ in 0..dim {
            let i = rem % per_axis;
            rem /= per_axis;
            if i == 0 || i == per_axis - 1 {
                w *= 0.5;
            }
        }
        sum += w * v * v;
    }
    (cell * sum).sqrt()
}

/// Outcome of one enabled check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    /// `None` for informational entries.
    pub pass: Option<bool>,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, pass: Option<bool>, detail: String) -> Self {
        Self {
            name: name.into(),
            pass,
            detail,
        }
    }

    pub fn failed(&self) -> bool {
        self.pass == Some(false)
    }
}

/// Runs the checks that apply to a record's scenario and backend.
pub fn check_record(record: &RunRecord) -> Result<Vec<CheckOutcome>> {
    let config: ScenarioConfig = serde_json::from_value(record.meta.config.clone())
        .map_err(|e| Error::record("meta.json", format!("embedded config: {e}")))?;
    let model = config.model()?;
    let s = &record.series;
    let backend = record.meta.backend;
    let mut out = Vec::new();
    let no_disturbance = config.disturbance.shape.is_none();
    let zero_mass = no_disturbance || config.disturbance.zero_mass;

    let funnel = check_funnel(s);
    if s.funnel.iter().any(|v| !v.is_nan()) {
        let detail = match funnel.first_violation {
            Some(t) => format!("eps = {:.6}, first violation at t = {t}", funnel.eps_observed),
            None => format!("eps = max phi|e| = {:.6} < 1", funnel.eps_observed),
        };
        out.push(CheckOutcome::new("funnel", Some(funnel.pass), detail));
    }

    if zero_mass && backend != Backend::Ode {
        let tol = if backend == Backend::Spectral { SPECTRAL_MASS_TOL } else { FD_MASS_TOL };
        let drift = mass_drift(s);
        out.push(CheckOutcome::new(
            "mass",
            Some(drift <= tol),
            format!("max |mass(t) - mass(0)| = {drift:.3e} (tol {tol:.0e})"),
        ));
    }

    if backend != Backend::Ode {
        let (min, first) = density_minimum(s);
        if no_disturbance {
            // truncation of a discontinuous p0 oscillates; judge relative to t = 0
            let floor = match backend {
                Backend::Spectral => -(POSITIVITY_TOL + (-first).max(0.0)),
                _ => -POSITIVITY_TOL,
            };
            out.push(CheckOutcome::new(
                "positivity",
                Some(min >= floor),
                format!("min density {min:.3e} (floor {floor:.3e})"),
            ));
        } else {
            out.push(CheckOutcome::new(
                "negative_density",
                None,
                format!("min density {min:.3e}{}", if min < 0.0 { ", negative values present" } else { "" }),
            ));
        }
        let b = boundedness(s);
        out.push(CheckOutcome::new(
            "h_norm",
            Some(b.max.is_finite()),
            format!(
                "||p||_h initial {:.4}, max {:.4}, sup first half {:.4}, second half {:.4}",
                b.initial, b.max, b.first_half, b.second_half
            ),
        ));
    }

    if no_disturbance && backend != Backend::Ode {
        match check_covariance_law(s, &model) {
            Ok(c) => out.push(CheckOutcome::new(
                "covariance_law",
                Some(c.max_p_deviation <= COVARIANCE_TOL),
                format!(
                    "max |P(t) - e^(-cLt) P(0) e^(-cLt)| = {:.3e}, final Cov = {:?}",
                    c.max_p_deviation, c.final_covariance
                ),
            )),
            Err(Error::Inapplicable(why)) => out.push(CheckOutcome::new("covariance_law", None, format!("skipped: {why}"))),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Pass/fail entries for a cross-validation report: the mean gap always,
/// the late snapshot gap when snapshots were compared.
pub fn cross_checks(report: &CrossReport) -> Vec<CheckOutcome> {
    let pair = format!("{}_vs_{}", report.backend_a, report.backend_b);
    let mut out = vec![CheckOutcome::new(
        &format!("{pair}.mean"),
        Some(report.mean_gap <= MEAN_GAP_TOL),
        format!("sup |y_a - y_b| = {:.3e} (tol {MEAN_GAP_TOL:.0e})", report.mean_gap),
    )];
    if let Some(gap) = report.max_snapshot_gap_late {
        out.push(CheckOutcome::new(
            &format!("{pair}.snapshots"),
            Some(gap <= SNAPSHOT_GAP_TOL),
            format!("max L2 gap for t >= {SNAPSHOT_GAP_FROM} = {gap:.3e} (tol {SNAPSHOT_GAP_TOL:.0e})"),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::Row;

    fn series_with(levels: &[f64]) -> Series {
        let mut s = Series::new(1);
        for (i, l) in levels.iter().enumerate() {
            s.push(Row {
                t: i as f64,
                y: vec![0.0],
                u: vec![0.0],
                e: vec![0.0],
                funnel: *l,
                margin: 1.0 - l,
                mass: 1.0,
                cov: vec![0.1],
                h_norm: 1.0,
                min_density: 0.0,
            });
        }
        s
    }

    #[test]
    fn funnel_check_cases() {
        let ok = check_funnel(&series_with(&[0.0, 0.0]));
        assert_eq!(ok.eps_observed, 0.0);
        assert!(ok.pass);
        let bad = check_funnel(&series_with(&[0.2, 1.3, 0.5, 1.1]));
        assert!(!bad.pass);
        assert_eq!(bad.first_violation, Some(1.0));
    }

    #[test]
    fn prediction_reproduces_initial_covariance() {
        let m = OuModel::from_rows(0.5, &[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let cov0 = DMatrix::from_row_slice(2, 2, &[0.4, 0.05, 0.05, 0.7]);
        let k = normalized_covariance(&m, &cov0);
        assert!((predicted_covariance(&m, &k, 0.0) - &cov0).norm() < 1e-13);
        let limit = predicted_covariance(&m, &k, 200.0);
        assert!((limit - m.stationary_covariance()).norm() < 1e-12);
    }

    #[test]
    fn bracket_and_interp() {
        let ts = [0.0, 1.0, 2.0];
        assert_eq!(bracket(&ts, 0.5), Some((0, 0.5)));
        assert_eq!(bracket(&ts, 2.0), Some((2, 0.0)));
        assert_eq!(bracket(&ts, 3.0), None);
        assert_eq!(interp_1d(&ts, &[0.0, 2.0, 4.0], 1.5), 3.0);
    }

    #[test]
    fn l2_of_constant_on_unit_interval() {
        let pts: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let f = vec![2.0; 101];
        assert!((grid_l2(&pts, 1, &f) - 2.0).abs() < 1e-12);
    }
}
