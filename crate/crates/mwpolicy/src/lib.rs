//! Numerical engine for a two-sector directed-search labor market with a
//! minimum wage, linear taxes and a corporate tax.
//!
//! The crate is split the same way the computation is:
//!
//! * [`model`] holds primitives and functional forms,
//! * [`equilibrium`] solves firms, workers and the government budget,
//! * [`calibration`] matches model moments to targets,
//! * [`policy`] sweeps tax / minimum-wage grids,
//! * [`suffstats`] evaluates the reduced-form welfare conditions,
//! * [`econpanel`] implements the stacked event-study estimator.
//!
//! The structural core (`model`, `equilibrium`, `suffstats`) is generic over
//! the floating-point type through [`Scalar`]. Everything that touches data,
//! grids or optimizers works in `f64`; the aliases below name the `f64`
//! instantiations.

// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod config;
pub mod econpanel;
pub mod equilibrium;
mod error;
pub mod model;
pub mod nelder_mead;
pub mod policy;
pub mod quadrature;
mod scalar;
pub mod suffstats;

pub use error::{Error, Result};
pub use scalar::{lit, Scalar};

pub type SkillParams = model::SkillParams<f64>;
pub type SectorParams = model::SectorParams<f64>;
pub type ModelParams = model::ModelParams<f64>;
pub type Policy = model::Policy<f64>;
pub type SectorEquilibrium = equilibrium::SectorEquilibrium<f64>;
pub type WorkerAggregates = equilibrium::WorkerAggregates<f64>;
pub type Equilibrium = equilibrium::Equilibrium<f64>;
pub type SolverOptions = equilibrium::SolverOptions<f64>;
pub type WelfareOptions = equilibrium::WelfareOptions<f64>;
pub type ElasticityInputs = suffstats::ElasticityInputs<f64>;
pub type WelfareWeights = suffstats::WelfareWeights<f64>;

/// Crate version, stamped into every CLI output header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
