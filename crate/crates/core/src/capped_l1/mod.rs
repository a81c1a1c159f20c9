//! Capped-ℓ1 regularized least squares `½‖Ax − b‖² + μ Σₖ min(|xₖ|, θ)`:
//! parallel best-response STELA with a closed-form stepsize, and the classic
//! and proximal MM baselines.

mod data;
mod mm;
mod problem;
mod stela;

pub use data::generate_data;
pub use mm::{
    capped_prox, run_classic_mm, run_proximal_mm, CLASSIC_MM_INNER_DELTA, CLASSIC_MM_INNER_MAX,
    CLASSIC_MM_OUTER_ITERS, PROXIMAL_MM_MAX_BACKTRACK,
};
pub use problem::{h_eval, xi_minus, CappedL1Problem, JacobiSurrogate};
pub use stela::{run_stela, stela_direction, stela_stepsize, Stepsize};
