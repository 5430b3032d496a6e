//! Solvers for time-inhomogeneous optimal stopping problems and zero-sum
//! Dynkin games over Itô diffusions.
//!
//! The value of a stopping problem is computed as the limit of penalized
//! parabolic equations on a truncated space-time grid; the game value comes
//! from a monotone alternating sequence of one-obstacle solves. Holding costs
//! are absorbed into the obstacles through the resolvent. A Monte Carlo
//! harness simulates the diffusion and checks values, stopping rules and
//! saddle-point inequalities independently of the PDE path.

// `!(x > 0.0)` deliberately rejects NaN; banded kernels index several arrays
// per loop.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod exec;
pub mod forms;
pub mod game;
pub mod grid;
pub mod linalg;
pub mod mc;
pub mod model;
pub mod obstacle;

pub use error::{Error, Result};
pub use exec::Execution;
pub use forms::{Boundary, Discretization, SliceOperator, TimeDerivativeSide};
pub use grid::{Axis, Mask, ScalarField, SpaceTimeGrid};
pub use model::{DensityMode, DensitySpec, DiffusionModel, DiffusionSpec, DriftSpec, SymmetrizingDensity};
