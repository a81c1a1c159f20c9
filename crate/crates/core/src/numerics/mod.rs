//! Dense linear algebra, seeded randomness and small polynomial solvers.

pub mod linalg;
pub mod matrix;
pub mod poly;
pub mod rng;

pub use linalg::{solve_spd, spectral_norm, Cholesky};
pub use matrix::{dot, DenseMatrix, DenseVector};
pub use poly::{
    cubic_real_roots, quartic_min_unit, quartic_value, shrink, soft_threshold, soft_threshold_matrix,
    soft_threshold_vec,
};
pub use rng::RngStream;
