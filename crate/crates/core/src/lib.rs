//! Simulation and certification toolkit for the maximal-entropy
//! win-martingale `dM = sin(pi M) / (pi sqrt(1-t)) dB`.
//!
//! * [`diffusion`]: time grids, seeded Euler–Maruyama ensembles, realized
//!   quadratic variation.
//! * [`martingales`]: the optimal martingale, the Bass martingale and
//!   time-changed competitors.
//! * [`entropy`]: Monte-Carlo specific relative entropy.
//! * [`value`]: closed-form value functions and residual certificates.
//! * [`discrete_mot`]: entropic martingale transport on a grid.
//! * [`cli`]: the `winmart` command-line front end.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diffusion;
pub mod discrete_mot;
pub mod entropy;
pub mod error;
pub mod martingales;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod value;

pub use error::{Error, Result};
