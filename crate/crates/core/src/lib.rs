//! Lavrentiev regularization for ill-posed equations `F(x) = y` with monotone
//! `F` on a discretized `L²(0,1)`.
//!
//! The regularized solution solves `F(x) + α(x − x̄) = yδ`. The crate provides
//!
//! - [`hilbert`]: uniform grids, the weighted inner product, exact-norm noise
//!   and log-log slope fitting;
//! - [`operators`]: the discrete Volterra operator (dense and matrix-free),
//!   resolvents, fractional powers via a Dunford integral and a
//!   Riemann–Liouville product-integration oracle;
//! - [`forward`]: the forward-model contract with a linear and a 1D semilinear
//!   elliptic instance;
//! - [`solver`]: linear and Newton-based Lavrentiev solvers and α-paths;
//! - [`rules`]: a priori, sequential discrepancy and Lepskiĭ parameter choice;
//! - [`source`]: distance functions, predicted rates and variational source
//!   condition checks;
//! - [`experiments`]: rate, rule-comparison and distance studies with CSV output;
//! - [`acceptance`]: the acceptance criteria as runnable checks.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod error;
pub mod experiments;
pub mod forward;
pub mod hilbert;
pub mod operators;
pub mod rules;
pub mod solver;
pub mod source;
mod tridiag;

pub use error::{Error, Result};
pub use hilbert::{add_noise, fit_loglog_slope, DiscreteFunction, Grid, GridLayout, NoiseSpec, SlopeFit};
