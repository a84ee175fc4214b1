use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("diffusion coefficient must be positive, got {0}")]
    NonPositiveDiffusion(f64),

    #[error("drift matrix is not symmetric: |G[{row}][{col}] - G[{col}][{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("drift matrix is not positive definite: eigenvalue {index} is {eigenvalue}")]
    NotPositiveDefinite { index: usize, eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unsupported dimension {0} (supported: 1..=3)")]
    UnsupportedDimension(usize),

    #[error("quadrature with {nodes} nodes integrates degree {exact} exactly, degree {needed} requested")]
    InsufficientQuadrature { nodes: usize, exact: usize, needed: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("funnel violated at t = {t}: margin 1 - phi*|e| = {margin:e}")]
    FunnelViolation { t: f64, margin: f64 },

    #[error("initial error outside the funnel: phi(0)*|e(0)| = {level} >= 1")]
    InfeasibleStart { level: f64 },

    #[error("funnel control requires nonzero initial mass, got {0}")]
    ZeroMass(f64),

    #[error("time step {dt} violates the stability bound; use dt <= {suggested:e}")]
    Unstable { dt: f64, suggested: f64 },

    #[error("time step {dt} violates the explicit diffusion limit; use dt <= {suggested:e}")]
    Cfl { dt: f64, suggested: f64 },

    #[error("covariance needs truncation order >= 2, basis has order {0}")]
    CovarianceUnavailable(usize),

    #[error("invalid funnel design: {0}")]
    FunnelDesign(String),

    #[error("invalid nonlinearity: {0}")]
    Nonlinearity(String),

    #[error("disturbance flagged zero-mass integrates to {mass:e} at t = {t}")]
    DisturbanceMass { t: f64, mass: f64 },

    #[error("check not applicable: {0}")]
    Inapplicable(String),

    #[error("records describe different scenarios: {0}")]
    ScenarioMismatch(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("malformed record {file}: {message}")]
    Record { file: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn record(file: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Record {
            file: file.into(),
            message: message.into(),
        }
    }
}
