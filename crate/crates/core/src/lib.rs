//! Simulation and verification toolkit for the shear-drift operator
//! `Δ_y u + β(y) u_x + γ(x, y) u = 0` on cylinders `(a, b) × B_R ⊂ ℝ × ℝ^{N-1}`.
//!
//! * [`expr`] parses coefficient functions and differentiates them exactly.
//! * [`operator`] holds the operator and domain, checks the sign-change and
//!   derivative conditions on `β`, classifies drift regions and computes
//!   finite-difference residuals.
//! * [`sde`] simulates `dX = β(Y) dt`, `dY = √2 dB` stopped on leaving a ball.
//! * [`feynman_kac`] evaluates and manufactures positive solutions through
//!   the stochastic representation.
//! * [`solutions`] is a catalog of exact solutions.
//! * [`harnack`] measures sup/inf ratios over subcylinders.

// `!(v > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod expr;
pub mod feynman_kac;
pub mod field;
pub mod harnack;
pub mod operator;
pub mod report;
pub mod rng;
pub mod sde;
pub mod solutions;

pub use error::{Error, Result};
pub use expr::{Expr, ExprError};
pub use field::{Axis, FnPoint, Grid, PointFunction, ScalarField};
pub use operator::{CylinderDomain, OperatorSpec};
pub use sde::{PathBatch, SimConfig};

