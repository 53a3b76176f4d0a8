//! Simulation and verification laboratory for Sharpe-ratio estimation when
//! returns follow a (long-memory) stochastic volatility model.
//!
//! Modules, bottom-up:
//! - [`model`]: model specification and closed-form population moments,
//! - [`simulate`]: seeded sample paths with direct or FFT convolution,
//! - [`estimators`]: Sharpe statistics and error decompositions,
//! - [`asymptotics`]: limiting-variance constants, each by more than one route,
//! - [`montecarlo`]: replicated experiments for rates, variances and normality,
//! - [`config`] and [`cli`]: the command-line front end.

pub mod asymptotics;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimators;
pub mod model;
pub mod montecarlo;
pub mod numeric;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{CoefficientSpec, InnovationLaw, ModelSpec, Truncation};
pub use simulate::{SamplePath, SimConfig};

/// Version string embedded in every output artifact.
pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
