//! Dense block-diagonal semidefinite programming.
//!
//! Solves equality-constrained SDPs in the standard primal form
//!
//! ```text
//!     maximize    <C, X>
//!     subject to  <A_i, X> = b_i   for i = 1..m
//!                 X >= 0           (block-diagonal PSD)
//! ```
//!
//! with the associated dual
//!
//! ```text
//!     minimize    b' y
//!     subject to  Z(y) = sum_i y_i A_i - C >= 0.
//! ```
//!
//! The solver is a primal-dual path-following interior-point method with
//! Nesterov-Todd scaling and a Mehrotra predictor-corrector, run on the
//! homogeneous self-dual embedding so that primal infeasibility and
//! unbounded rays are detected rather than diverging.
//!
//! Weak duality in this orientation reads `b' y >= <C, X>` for any feasible
//! pair, so a (repaired) dual point always yields a certified upper bound on
//! the primal optimum. [`dual_feasibility_repair`] turns the solver's
//! approximately feasible multipliers into an exactly feasible dual point by
//! shifting along a constraint whose coefficient is the identity on every
//! block.

mod problem;
mod repair;
mod sdpa;
mod solver;

pub use problem::{BlockMat, SdpError, SdpProblem, SparseSymMat};
pub use repair::{dual_feasibility_repair, RepairedDual};
pub use sdpa::write_sdpa_sparse;
pub use solver::{solve, SdpSolution, SolveOptions, SolveStatus};
