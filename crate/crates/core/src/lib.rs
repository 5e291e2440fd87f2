//! Functional-discrete (FD) solver for the Goursat problem
//!
//! ```text
//! u_xy + N(u) u = f(x, y),   u(x, 0) = ψ(x),   u(0, y) = φ(y)
//! ```
//!
//! The solution is approximated by a finite sum `u^(0) + u^(1) + ... + u^(m)`.
//! `u^(0)` solves the problem with `N` frozen at each mesh cell's lower-left
//! corner; every later `u^(k)` solves a linear problem whose source is built
//! from Adomian polynomials of the earlier terms. Each cell problem has
//! constant coefficients and is solved through its Riemann function.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod harness;
pub mod kernels;
pub mod problem;
pub mod selftest;
pub mod series;
pub mod solver;

pub use error::{Error, Result};
pub use field::{CornerTable, EdgeTrace, Grid, PiecewiseField, Rect, Side};

pub use harness::{convergence_study, fd_solve, ErrorReport, ReportRow, StudySpec};
pub use kernels::RiemannKernel;
pub use problem::GoursatProblem;
pub use series::{Nonlinearity, TruncatedSeries};
pub use solver::{FdExpansion, SolverOptions};
