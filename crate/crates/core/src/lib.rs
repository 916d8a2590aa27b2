//! Simulation of the radially symmetric critical flux-limited chemotaxis
//! system through its accumulated-density reduction.
//!
//! The unknown is `U(xi, t)`, the mass inside the ball of radius `xi^{1/N}`
//! divided by `omega_N`, which solves a single degenerate parabolic equation
//! on `[0, 1]` with `U(0) = 0` and `U(1) = m / omega_N`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod integrator;
pub mod model;
pub mod operator;
pub mod quadrature;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::{Grid, State};
pub use integrator::{integrate, Outcome, RunRecord, SolverConfig};
pub use model::{ModelParams, RadialProfile, SteadyProfile};
