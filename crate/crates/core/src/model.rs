//! Problem data of the controlled Ornstein–Uhlenbeck process and the
//! spectral factors derived from the drift matrix.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eigen::jacobi_eigen;
use crate::error::{Error, Result};
use crate::quadrature::{BoxRule, QuadratureRule};

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const MAX_DIM: usize = 3;

/// Diffusion `c`, SPD drift `Gamma`, and the factorization
/// `Gamma = c V diag(lambda) V^T` with `u_k = sqrt(lambda_k / 2) v_k`.
#[derive(Debug, Clone)]
pub struct OuModel {
    c: f64,
    gamma: DMatrix<f64>,
    gamma_eigenvalues: DVector<f64>,
    v: DMatrix<f64>,
    lambda: Vec<f64>,
    r: Vec<f64>,
    /// column k is u_k
    u: DMatrix<f64>,
    /// F = V R^{-1}, so x = F y for Hermite coordinates y
    f: DMatrix<f64>,
    log_det_u: f64,
}

impl OuModel {
    pub fn new(c: f64, gamma: DMatrix<f64>) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::NonPositiveDiffusion(c));
        }
        let n = gamma.nrows();
        if n != gamma.ncols() {
            return Err(Error::Dimension {
                expected: n,
                got: gamma.ncols(),
            });
        }
        if n == 0 || n > MAX_DIM {
            return Err(Error::UnsupportedDimension(n));
        }
        if gamma.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("drift matrix".into()));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let gap = (gamma[(i, j)] - gamma[(j, i)]).abs();
                if gap > SYMMETRY_TOL {
                    return Err(Error::NotSymmetric { row: i, col: j, gap });
                }
            }
        }
        let eig = jacobi_eigen(&gamma);
        if let Some((index, &eigenvalue)) =
            eig.eigenvalues.iter().enumerate().find(|(_, &l)| l <= 0.0)
        {
            return Err(Error::NotPositiveDefinite { index, eigenvalue });
        }
        let v = eig.eigenvectors;
        let lambda: Vec<f64> = eig.eigenvalues.iter().map(|l| l / c).collect();
        let r: Vec<f64> = lambda.iter().map(|l| (l / 2.0).sqrt()).collect();
        let mut u = v.clone();
        let mut f = v.clone();
        for k in 0..n {
            u.column_mut(k).scale_mut(r[k]);
            f.column_mut(k).scale_mut(1.0 / r[k]);
        }
        let log_det_u = r.iter().map(|x| x.ln()).sum();
        Ok(Self {
            c,
            gamma,
            gamma_eigenvalues: eig.eigenvalues,
            v,
            lambda,
            r,
            u,
            f,
            log_det_u,
        })
    }

    /// Convenience constructor for `Gamma` given row by row.
    pub fn from_rows(c: f64, rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: row.len(),
                });
            }
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(c, DMatrix::from_row_slice(n, n, &flat))
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    /// Eigenvalues of `Gamma` itself, ascending.
    pub fn gamma_eigenvalues(&self) -> &DVector<f64> {
        &self.gamma_eigenvalues
    }

    /// `lambda_k = eig_k(Gamma) / c`.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambda
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// Diagonal of `R = diag(sqrt(lambda_k / 2))`.
    pub fn r_diag(&self) -> &[f64] {
        &self.r
    }

    pub fn r_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.r))
    }

    pub fn lambda_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.lambda))
    }

    /// Matrix whose columns are the `u_k`.
    pub fn u_vectors(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// `F` with `F^T = (V R)^{-1}`.
    pub fn f_matrix(&self) -> &DMatrix<f64> {
        &self.f
    }

    /// `ln |det U|` where `U` has rows `u_k^T`; the Jacobian of `x -> y`.
    pub fn log_det_u(&self) -> f64 {
        self.log_det_u
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += x[i] * self.gamma[(i, j)] * x[j];
            }
        }
        acc / (2.0 * self.c)
    }

    /// `y_k = u_k . x`.
    pub fn to_hermite_coords(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        for k in 0..n {
            y[k] = (0..n).map(|i| self.u[(i, k)] * x[i]).sum();
        }
    }

    /// Inverse of [`Self::to_hermite_coords`]: `x = F y`.
    pub fn from_hermite_coords(&self, y: &[f64], x: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            x[i] = (0..n).map(|k| self.f[(i, k)] * y[k]).sum();
        }
    }

    /// `Z = int exp(-phi) dx = pi^{n/2} / |det U|`.
    pub fn stationary_normalizer(&self) -> f64 {
        let n = self.dim() as f64;
        (0.5 * n * std::f64::consts::PI.ln() - self.log_det_u).exp()
    }

    /// The normalized stationary law `exp(-phi(x)) / Z`.
    pub fn stationary_density(&self, x: &[f64]) -> f64 {
        (-self.phi(x)).exp() / self.stationary_normalizer()
    }

    /// `c Gamma^{-1}`, the limit covariance.
    pub fn stationary_covariance(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::zeros(n, n);
        for k in 0..n {
            let vk = self.v.column(k);
            inv += (vk * vk.transpose()) / self.lambda[k];
        }
        inv
    }

    /// `int exp(-phi(x)) f(x) dx` by the Gauss–Hermite rule in Hermite coordinates.
    pub fn weighted_integral(&self, rule: &QuadratureRule, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let n = self.dim();
        let mut x = vec![0.0; n];
        let jac = (-self.log_det_u).exp();
        jac * rule.integrate(|y| {
            self.from_hermite_coords(y, &mut x);
            f(&x)
        })
    }
}

/// Input nonlinearity `g`. Every built-in is linearly bounded; the
/// high-gain property additionally requires `g` to be unbounded along rays
/// with a definite sign, which [`Nonlinearity::has_high_gain_property`] reports.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Nonlinearity {
    #[default]
    Identity,
    /// `g(v) = gain * v`.
    Scaled { gain: f64 },
    /// Componentwise `level * tanh(v / level)`; bounded, so no high-gain property.
    Saturating { level: f64 },
    /// Componentwise piecewise-linear interpolation of `(v, g(v))` pairs,
    /// extended linearly beyond the table ends.
    Table { points: Vec<[f64; 2]> },
}

impl Nonlinearity {
    pub const BOUND_SAMPLES: usize = 10_000;
    pub const BOUND_RADIUS: f64 = 100.0;
    pub const BOUND_SEED: u64 = 0x0F01;

    pub fn validate(&self) -> Result<()> {
        match self {
            Nonlinearity::Identity => Ok(()),
            Nonlinearity::Scaled { gain } => {
                if gain.is_finite() && *gain != 0.0 {
                    Ok(())
                } else {
                    Err(Error::Nonlinearity(format!("gain must be finite and nonzero, got {gain}")))
                }
            }
            Nonlinearity::Saturating { level } => {
                if level.is_finite() && *level > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Nonlinearity(format!("level must be positive, got {level}")))
                }
            }
            Nonlinearity::Table { points } => {
                if points.len() < 2 {
                    return Err(Error::Nonlinearity("table needs at least two points".into()));
                }
                if points.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::Nonlinearity("table entries must be finite".into()));
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(Error::Nonlinearity("table abscissae must be strictly increasing".into()));
                }
                if self.scalar(0.0).abs() > 1e-12 {
                    return Err(Error::Nonlinearity("table must pass through the origin".into()));
                }
                Ok(())
            }
        }
    }

    fn scalar(&self, v: f64) -> f64 {
        match self {
            Nonlinearity::Identity => v,
            Nonlinearity::Scaled { gain } => gain * v,
            Nonlinearity::Saturating { level } => level * (v / level).tanh(),
            Nonlinearity::Table { points } => {
                let n = points.len();
                let seg = if v <= points[0][0] {
                    0
                } else if v >= points[n - 1][0] {
                    n - 2
                } else {
                    points.partition_point(|p| p[0] <= v) - 1
                };
                let [x0, y0] = points[seg];
                let [x1, y1] = points[seg + 1];
                y0 + (y1 - y0) * (v - x0) / (x1 - x0)
            }
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|&x| self.scalar(x)).collect()
    }

    /// The claimed constant `gbar` with `|g(v)| <= gbar |v|`.
    pub fn bound(&self) -> f64 {
        match self {
            Nonlinearity::Identity | Nonlinearity::Saturating { .. } => 1.0,
            Nonlinearity::Scaled { gain } => gain.abs(),
            Nonlinearity::Table { points } => {
                let n = points.len();
                let end_slope = |a: [f64; 2], b: [f64; 2]| ((b[1] - a[1]) / (b[0] - a[0])).abs();
                let mut bound = end_slope(points[0], points[1]).max(end_slope(points[n - 2], points[n - 1]));
                for p in points {
                    if p[0] != 0.0 {
                        bound = bound.max((p[1] / p[0]).abs());
                    }
                }
                bound
            }
        }
    }

    /// Checks `|g(v)| <= gbar |v|` on a seeded sample of the ball `|v| <= 100`.
    pub fn verify_bound(&self, dim: usize) -> Result<()> {
        let gbar = self.bound();
        let mut rng = ChaCha8Rng::seed_from_u64(Self::BOUND_SEED);
        let mut v = vec![0.0; dim];
        let mut accepted = 0;
        while accepted < Self::BOUND_SAMPLES {
            for x in v.iter_mut() {
                *x = rng.gen_range(-Self::BOUND_RADIUS..=Self::BOUND_RADIUS);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > Self::BOUND_RADIUS {
                continue;
            }
            accepted += 1;
            let g = self.apply(&v);
            let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if gn > gbar * norm * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::Nonlinearity(format!(
                    "|g(v)| = {gn} exceeds {gbar} * |v| = {} at v = {v:?}",
                    gbar * norm
                )));
            }
        }
        Ok(())
    }

    /// Whether `sup_s min_{delta <= |v| <= 1} v . g(-s v) = infinity` holds.
    /// Not machine-checked; it follows from the shape of each built-in.
    pub fn has_high_gain_property(&self) -> bool {
        match self {
            Nonlinearity::Identity | Nonlinearity::Scaled { .. } => true,
            Nonlinearity::Saturating { .. } => false,
            Nonlinearity::Table { points } => {
                let n = points.len();
                let left = (points[1][1] - points[0][1]) / (points[1][0] - points[0][0]);
                let right = (points[n - 1][1] - points[n - 2][1]) / (points[n - 1][0] - points[n - 2][0]);
                left * right > 0.0
            }
        }
    }
}

/// Additive disturbance `d(t, x) = cos(omega t) * profile(x)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Disturbance {
    #[default]
    None,
    /// `amplitude cos(omega t) x_axis exp(-width |x|^2)`; odd in `x_axis`, so zero mass.
    Dipole {
        amplitude: f64,
        omega: f64,
        width: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `amplitude cos(omega t) exp(-width |x - center|^2)`; carries mass.
    Bump {
        amplitude: f64,
        omega: f64,
        width: f64,
        center: Vec<f64>,
    },
}

impl Disturbance {
    pub fn is_none(&self) -> bool {
        matches!(self, Disturbance::None)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::config("disturbance", m));
        match self {
            Disturbance::None => Ok(()),
            Disturbance::Dipole {
                amplitude,
                omega,
                width,
                axis,
            } => {
                if !amplitude.is_finite() || !omega.is_finite() {
                    return bad("amplitude and omega must be finite".into());
                }
                if !(*width > 0.0) {
                    return bad(format!("width must be positive, got {width}"));
                }
                if *axis >= dim {
                    return bad(format!("axis {axis} out of range for dimension {dim}"));
                }
                Ok(())
            }
            Disturbance::Bump {
                amplitude,
                omega,
                width,
                center,
            } => {
                if !amplitude.is_finite() || !omega.is_finite() {
                    return bad("amplitude and omega must be finite".into());
                }
                if !(*width > 0.0) {
                    return bad(format!("width must be positive, got {width}"));
                }
                if center.len() != dim {
                    return bad(format!("center has {} entries, dimension is {dim}", center.len()));
                }
                Ok(())
            }
        }
    }

    pub fn time_factor(&self, t: f64) -> f64 {
        match self {
            Disturbance::None => 0.0,
            Disturbance::Dipole { omega, .. } | Disturbance::Bump { omega, .. } => (omega * t).cos(),
        }
    }

    pub fn profile(&self, x: &[f64]) -> f64 {
        match self {
            Disturbance::None => 0.0,
            Disturbance::Dipole {
                amplitude,
                width,
                axis,
                ..
            } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                amplitude * x[*axis] * (-width * r2).exp()
            }
            Disturbance::Bump {
                amplitude,
                width,
                center,
                ..
            } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                amplitude * (-width * r2).exp()
            }
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        self.time_factor(t) * self.profile(x)
    }

    /// `int d(t, x) dx` by box quadrature.
    pub fn mass(&self, t: f64, rule: &BoxRule) -> f64 {
        self.time_factor(t) * rule.integrate(|x| self.profile(x))
    }

    /// Checks the zero-mass condition at the given sample times.
    pub fn verify_zero_mass(&self, times: &[f64], rule: &BoxRule) -> Result<()> {
        let profile_mass = rule.integrate(|x| self.profile(x));
        for &t in times {
            let mass = self.time_factor(t) * profile_mass;
            if mass.abs() > 1e-8 {
                return Err(Error::DisturbanceMass { t, mass });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn scalar_model_factorization() {
        let m = OuModel::from_rows(0.1, &[vec![1.0]]).unwrap();
        assert_relative_eq!(m.lambdas()[0], 10.0, max_relative = 1e-15);
        assert_relative_eq!(m.r_diag()[0], 5f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(m.u_vectors()[(0, 0)], 5f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(m.phi(&[1.0]), 5.0, max_relative = 1e-15);
        assert_eq!(m.phi(&[0.0]), 0.0);
    }

    #[test]
    fn identity_model() {
        let m = OuModel::new(1.0, DMatrix::identity(2, 2)).unwrap();
        assert_eq!(m.eigenvectors(), &DMatrix::<f64>::identity(2, 2));
        assert_eq!(m.lambdas(), &[1.0, 1.0]);
        for r in m.r_diag() {
            assert_relative_eq!(*r, std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-15);
        }
    }

    #[test]
    fn lambda_is_scaled_by_diffusion() {
        let m = OuModel::from_rows(0.5, &[vec![2.0, 0.0], vec![0.0, 8.0]]).unwrap();
        assert_eq!(m.lambdas(), &[4.0, 16.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            OuModel::from_rows(0.0, &[vec![1.0]]),
            Err(Error::NonPositiveDiffusion(_))
        ));
        assert!(matches!(
            OuModel::from_rows(1.0, &[vec![1.0, 2.0], vec![0.0, 1.0]]),
            Err(Error::NotSymmetric { .. })
        ));
        match OuModel::from_rows(1.0, &[vec![1.0, 2.0], vec![2.0, 1.0]]) {
            Err(Error::NotPositiveDefinite { index, eigenvalue }) => {
                assert_eq!(index, 0);
                assert_relative_eq!(eigenvalue, -1.0, epsilon = 1e-12);
            }
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
        assert!(OuModel::from_rows(1.0, &vec![vec![1.0; 4]; 4]).is_err());
    }

    #[test]
    fn stationary_density_is_normalized() {
        let m = OuModel::from_rows(0.3, &[vec![2.0, 0.4], vec![0.4, 1.0]]).unwrap();
        let rule = QuadratureRule::new(2, 10);
        let mass = m.weighted_integral(&rule, |_| 1.0) / m.stationary_normalizer();
        assert_relative_eq!(mass, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn nonlinearity_bounds() {
        for g in [
            Nonlinearity::Identity,
            Nonlinearity::Scaled { gain: -2.5 },
            Nonlinearity::Saturating { level: 0.7 },
            Nonlinearity::Table {
                points: vec![[-1.0, -3.0], [0.0, 0.0], [2.0, 1.0]],
            },
        ] {
            g.validate().unwrap();
            g.verify_bound(2).unwrap();
        }
        assert!(!Nonlinearity::Saturating { level: 1.0 }.has_high_gain_property());
        assert!(Nonlinearity::Identity.has_high_gain_property());
    }

    #[test]
    fn table_interpolates_and_extrapolates() {
        let g = Nonlinearity::Table {
            points: vec![[-1.0, -2.0], [0.0, 0.0], [1.0, 1.0]],
        };
        assert_eq!(g.apply(&[0.5, -0.5, 3.0, -2.0]), vec![0.5, -1.0, 3.0, -4.0]);
        assert_eq!(g.bound(), 2.0);
        let off = Nonlinearity::Table {
            points: vec![[-1.0, 0.0], [1.0, 1.0]],
        };
        assert!(off.validate().is_err());
    }

    #[test]
    fn dipole_has_zero_mass_and_bump_does_not() {
        let rule = BoxRule::for_projection(1, &[]);
        let dipole = Disturbance::Dipole {
            amplitude: 3.0,
            omega: 4.0,
            width: 3.0,
            axis: 0,
        };
        dipole.verify_zero_mass(&[0.0, 0.3, 1.7], &rule).unwrap();
        let bump = Disturbance::Bump {
            amplitude: 1.0,
            omega: 0.0,
            width: 1.0,
            center: vec![0.5],
        };
        assert!(matches!(
            bump.verify_zero_mass(&[0.0], &rule),
            Err(Error::DisturbanceMass { .. })
        ));
    }
}
