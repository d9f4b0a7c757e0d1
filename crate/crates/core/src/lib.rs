//! Third-order WENO finite-volume discretization of shallow-water and
//! channel flow with a Newton–multigrid steady-state solver.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod mesh;
pub mod model;
pub mod reconstruction;
pub mod jacobian;
pub mod multigrid;
pub mod residual;
pub mod newton;
pub mod cases;
pub mod driver;

pub use error::{Result, SolverError};
