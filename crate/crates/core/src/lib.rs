//! Spectral and finite-difference solvers for Fokker-Planck equations with
//! Ornstein-Uhlenbeck drift, and a funnel controller for the mean.

// NaN must fail range checks, and index loops mirror the formulas
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod control;
pub mod density;
pub mod diagnostics;
pub mod eigen;
pub mod error;
pub mod fd;
pub mod hermite;
pub mod model;
pub mod ode;
pub mod quadrature;
pub mod record;
pub mod runner;
pub mod spectral;

pub use density::{Density, InitialDensity};
pub use error::{Error, Result};
pub use hermite::{BasisTable, MultiIndex};
pub use model::{Disturbance, Nonlinearity, OuModel};
pub use quadrature::{BoxRule, QuadratureRule};
pub use config::ScenarioConfig;
pub use record::{Backend, RunRecord};
pub use runner::Scenario;
