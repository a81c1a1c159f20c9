//! Generic successive convex approximation for `f + g⁺ − g⁻`.
//!
//! A problem supplies `f`, `∇f`, `g⁺`, `g⁻` and one subgradient `ξ⁻` of `g⁻`.
//! Each iteration linearizes `g⁻` at the current point, asks a [`Surrogate`]
//! for the best response `𝔹xᵗ` of the resulting convex problem, and moves
//! along `𝔹xᵗ − xᵗ` with a stepsize chosen on the differentiable majorant
//! `f(xᵗ + γd) + γ(g⁺(𝔹xᵗ) − g⁺(xᵗ) − dᵀξ⁻)`. That model only needs
//! `g⁺(𝔹xᵗ)` once per iteration, whatever the line search does.

mod driver;
mod gist;
mod line_search;
mod problem;
mod surrogate;
pub mod trace;

pub use driver::{run_sca, DEFAULT_DELTA, DEFAULT_MAX_ITER, MONOTONE_TOL};
pub use gist::{gist_baseline, GIST_MAX_BACKTRACK};
pub use line_search::{exact_line_search_convex, successive_line_search, LineSearchSpec, BISECTION_TOL};
pub use problem::{
    descent_check, directional_gap, stationarity_gap, subgradient_holds, upper_bound_eval, DcProblem, ProxGplus,
    DESCENT_EPS,
};
pub use surrogate::{proximal_surrogate, ProximalSurrogate, Surrogate};
pub use trace::{IterationCounters, IterationTrace, SolveReport};
