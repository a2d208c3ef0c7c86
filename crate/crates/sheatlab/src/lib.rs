//! sheatlab: a Monte Carlo laboratory for the one-dimensional stochastic
//! heat equation driven by multiplicative space-time white noise.
//!
//! The crate simulates
//!
//! ```text
//! du/dt = (kappa/2) d^2u/dx^2 + sigma(u) dW/dtdx,   u_0 = 1,
//! ```
//!
//! with an explicit finite-difference scheme on seeded, reproducible noise
//! streams, and ships the deterministic oracles (heat-kernel identities,
//! Volterra renewal curves, Gaussian moment formulas) and statistical
//! estimators (tail laws, sup-growth regressions, localization coupling,
//! independence and Lyapunov checks) needed to test the solution's
//! fixed-time behavior at desk scale.

pub mod config;
pub mod error;
pub mod estimator;
pub mod heatkernel;
pub mod noise;
pub mod oracle;
pub mod runner;
pub mod sigma;
pub mod solver;

pub use error::{Error, Result};
pub use noise::{derive_stream, make_block_plan, BlockPlan, GridSpec, NoiseStream};
pub use sigma::SigmaSpec;
pub use solver::{
    solve, solve_coupled_pair, solve_localization_pair, solve_localized, step, sup_over_radius,
    Boundary, CoupledPair, Field, RunConfig, Simulation,
};

/// Version string embedded in every output file.
pub const VERSION: &str = concat!("sheatlab ", env!("CARGO_PKG_VERSION"));
