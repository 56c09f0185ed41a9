//! Singular limits of bistable reaction-diffusion fronts whose traveling-wave
//! speed jumps across a fixed hypersurface, together with independent
//! solvers for the limiting front motion.
//!
//! * [`field`]: grids, scalar fields, level sets and distances.
//! * [`model`]: the cubic reaction term, velocity family and traveling waves.
//! * [`rd`]: explicit solvers for both reaction-diffusion scalings.
//! * [`hj`]: monotone level-set solvers for the limit equations.
//! * [`arrival`]: shortest travel times and the inf-convolution formula.
//! * [`limits`]: the ε-ladder harness and convergence reports.
//! * [`cli`]: experiment files and the command-line driver.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod expr;
pub mod field;
pub mod model;
pub mod rd;
pub mod hj;
pub mod arrival;
pub mod limits;
pub mod cli;

pub use error::{Error, Result};
