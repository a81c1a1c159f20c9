//! Low-rank plus sparse decomposition for network anomaly detection:
//! `min ½‖PQ + DS − Y‖² + (λ/2)(‖P‖² + ‖Q‖²) + μ‖S‖₁`.
//!
//! STELA updates all three blocks in parallel from closed-form best responses
//! and takes the exact minimizing step of a quartic model; BCD and ADMM are the
//! comparison baselines.

mod admm;
mod bcd;
mod data;
pub(crate) mod kernels;
mod problem;
mod stela;

pub use admm::{admm_a_factor, admm_a_update, admm_b_update, admm_cycle, run_admm, AdmmState, ADMM_DEFAULT_C};
pub use bcd::run_bcd;
pub use data::generate_data;
pub use problem::{objective, AnomalyProblem, AnomalyState};
pub use stela::{
    best_response, exact_line_search_quartic, quartic_coeffs, relative_error, run_stela, AnomalySurrogate,
    QuarticCoeffs,
};
