//! Named initial densities.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OuModel;

fn unit_mass() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDensity {
    /// Uniform on a union of disjoint intervals (1D only), total mass `mass`.
    TwoBox {
        boxes: Vec<[f64; 2]>,
        #[serde(default = "unit_mass")]
        mass: f64,
    },
    /// Normal law with the given mean and covariance.
    Gaussian { mean: Vec<f64>, covariance: Vec<Vec<f64>> },
    /// The stationary law `exp(-phi) / Z` of the model.
    Stationary,
}

/// An initial density resolved against a model, ready for pointwise evaluation.
#[derive(Debug, Clone)]
pub struct Density {
    inner: Resolved,
}

#[derive(Debug, Clone)]
enum Resolved {
    Boxes { boxes: Vec<[f64; 2]>, height: f64 },
    Gaussian {
        mean: DVector<f64>,
        precision: DMatrix<f64>,
        norm: f64,
        spread: f64,
    },
    Stationary(Box<OuModel>),
}

impl InitialDensity {
    pub fn asymmetric_two_box() -> Self {
        InitialDensity::TwoBox {
            boxes: vec![[-1.0, -0.5], [0.25, 0.75]],
            mass: 1.0,
        }
    }

    pub fn resolve(&self, model: &OuModel) -> Result<Density> {
        let dim = model.dim();
        let inner = match self {
            InitialDensity::TwoBox { boxes, mass } => {
                if dim != 1 {
                    return Err(Error::config("initial.kind", "two_box is one-dimensional"));
                }
                if boxes.is_empty() {
                    return Err(Error::config("initial.boxes", "at least one interval required"));
                }
                let mut sorted = boxes.clone();
                sorted.sort_by(|a, b| a[0].total_cmp(&b[0]));
                for b in &sorted {
                    if !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]) {
                        return Err(Error::config("initial.boxes", format!("invalid interval {b:?}")));
                    }
                }
                if sorted.windows(2).any(|w| w[1][0] < w[0][1]) {
                    return Err(Error::config("initial.boxes", "intervals overlap"));
                }
                if !mass.is_finite() {
                    return Err(Error::config("initial.mass", "mass must be finite"));
                }
                let length: f64 = sorted.iter().map(|b| b[1] - b[0]).sum();
                Resolved::Boxes {
                    boxes: sorted,
                    height: mass / length,
                }
            }
            InitialDensity::Gaussian { mean, covariance } => {
                if mean.len() != dim || covariance.len() != dim || covariance.iter().any(|r| r.len() != dim) {
                    return Err(Error::config("initial", format!("mean/covariance must be {dim}-dimensional")));
                }
                let flat: Vec<f64> = covariance.iter().flatten().copied().collect();
                let cov = DMatrix::from_row_slice(dim, dim, &flat);
                if (&cov - cov.transpose()).amax() > 1e-12 {
                    return Err(Error::config("initial.covariance", "covariance must be symmetric"));
                }
                let chol = cov
                    .clone()
                    .cholesky()
                    .ok_or_else(|| Error::config("initial.covariance", "covariance must be positive definite"))?;
                // p0 in L2(e^phi) needs Sigma < 2 c Gamma^{-1}
                let room = model.stationary_covariance() * 2.0 - &cov;
                if room.cholesky().is_none() {
                    return Err(Error::config(
                        "initial.covariance",
                        "covariance must be below twice the stationary covariance for p0 to lie in the weighted space",
                    ));
                }
                let det: f64 = chol.l().diagonal().iter().map(|d| d * d).product();
                let norm = ((2.0 * std::f64::consts::PI).powi(dim as i32) * det).sqrt().recip();
                Resolved::Gaussian {
                    mean: DVector::from_column_slice(mean),
                    precision: chol.inverse(),
                    norm,
                    spread: cov.diagonal().max().sqrt(),
                }
            }
            InitialDensity::Stationary => Resolved::Stationary(Box::new(model.clone())),
        };
        Ok(Density { inner })
    }
}

impl Density {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.inner {
            Resolved::Boxes { boxes, height } => {
                if boxes.iter().any(|b| x[0] >= b[0] && x[0] <= b[1]) {
                    *height
                } else {
                    0.0
                }
            }
            Resolved::Gaussian {
                mean, precision, norm, ..
            } => {
                let d = DVector::from_column_slice(x) - mean;
                norm * (-0.5 * d.dot(&(precision * &d))).exp()
            }
            Resolved::Stationary(model) => model.stationary_density(x),
        }
    }

    /// Discontinuity locations per axis.
    pub fn breakpoints(&self) -> Vec<Vec<f64>> {
        match &self.inner {
            Resolved::Boxes { boxes, .. } => vec![boxes.iter().flat_map(|b| [b[0], b[1]]).collect()],
            _ => Vec::new(),
        }
    }

    /// Closed-form mass `P0` and mean `E0`.
    pub fn mass_and_mean(&self, dim: usize) -> (f64, Vec<f64>) {
        match &self.inner {
            Resolved::Boxes { boxes, height } => {
                let mass = height * boxes.iter().map(|b| b[1] - b[0]).sum::<f64>();
                let first = height * boxes.iter().map(|b| 0.5 * (b[1] * b[1] - b[0] * b[0])).sum::<f64>();
                (mass, vec![first])
            }
            Resolved::Gaussian { mean, .. } => (1.0, mean.iter().copied().collect()),
            Resolved::Stationary(_) => (1.0, vec![0.0; dim]),
        }
    }

    /// Half-width of a box outside of which the density is negligible
    /// (below roughly `exp(-70)` of its peak).
    pub fn extent(&self) -> f64 {
        match &self.inner {
            Resolved::Boxes { boxes, .. } => boxes.iter().map(|b| b[0].abs().max(b[1].abs())).fold(0.0, f64::max),
            Resolved::Gaussian { mean, spread, .. } => mean.amax() + 12.0 * spread,
            Resolved::Stationary(model) => 12.0 * model.stationary_covariance().diagonal().max().sqrt(),
        }
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self.inner, Resolved::Boxes { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::BoxRule;
    use approx::assert_relative_eq;

    #[test]
    fn two_box_mass_and_mean() {
        let model = OuModel::from_rows(0.1, &[vec![1.0]]).unwrap();
        let p0 = InitialDensity::asymmetric_two_box().resolve(&model).unwrap();
        let rule = BoxRule::for_projection(1, &p0.breakpoints());
        assert_relative_eq!(rule.integrate(|x| p0.eval(x)), 1.0, epsilon = 1e-14);
        assert_relative_eq!(rule.integrate(|x| x[0] * p0.eval(x)), -0.125, epsilon = 1e-14);
        assert_eq!(p0.mass_and_mean(1), (1.0, vec![-0.125]));
        assert_eq!(p0.eval(&[-0.75]), 1.0);
        assert_eq!(p0.eval(&[0.0]), 0.0);
    }

    #[test]
    fn gaussian_is_normalized() {
        let model = OuModel::from_rows(1.0, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let p0 = InitialDensity::Gaussian {
            mean: vec![0.3, -0.2],
            covariance: vec![vec![0.5, 0.1], vec![0.1, 0.3]],
        }
        .resolve(&model)
        .unwrap();
        let rule = BoxRule::for_projection(2, &[]);
        assert_relative_eq!(rule.integrate(|x| p0.eval(x)), 1.0, epsilon = 1e-12);
        assert_relative_eq!(rule.integrate(|x| x[0] * p0.eval(x)), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn rejects_invalid_shapes() {
        let m1 = OuModel::from_rows(1.0, &[vec![1.0]]).unwrap();
        let m2 = OuModel::from_rows(1.0, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(InitialDensity::asymmetric_two_box().resolve(&m2).is_err());
        let overlapping = InitialDensity::TwoBox {
            boxes: vec![[0.0, 1.0], [0.5, 2.0]],
            mass: 1.0,
        };
        assert!(overlapping.resolve(&m1).is_err());
        let indefinite = InitialDensity::Gaussian {
            mean: vec![0.0],
            covariance: vec![vec![-1.0]],
        };
        assert!(indefinite.resolve(&m1).is_err());
        // stationary variance is 1, so variance 2 is outside the weighted space
        let wide = InitialDensity::Gaussian {
            mean: vec![0.0],
            covariance: vec![vec![2.0]],
        };
        assert!(wide.resolve(&m1).is_err());
        let inside = InitialDensity::Gaussian {
            mean: vec![0.0],
            covariance: vec![vec![1.9]],
        };
        assert!(inside.resolve(&m1).is_ok());
    }
}
