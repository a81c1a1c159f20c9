use crate::capped_l1::problem::CappedL1Problem;
use crate::error::{Error, Result};
use crate::numerics::{DenseVector, RngStream};

/// Synthetic sparse-regression instance.
///
/// `A` has standard normal entries with rows rescaled to unit norm, `x_true`
/// has `⌈density·K⌉` standard normal entries at uniform positions and
/// `b = A·x_true + e` with `e ~ N(0, noise_var)`. Then `μ = 0.1‖Aᵀb‖_∞`, `θ = 1`.
pub fn generate_data(
    n: usize,
    k: usize,
    density: f64,
    noise_var: f64,
    seed: u64,
) -> Result<(CappedL1Problem, DenseVector)> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidParameter(format!("dimensions must be positive, got {n}×{k}")));
    }
    if !(density > 0.0 && density < 1.0) {
        return Err(Error::InvalidParameter(format!("density must lie in (0,1), got {density}")));
    }
    if !(noise_var >= 0.0) || !noise_var.is_finite() {
        return Err(Error::InvalidParameter(format!("noise variance must be nonnegative, got {noise_var}")));
    }
    let mut rng = RngStream::new(seed);
    let mut a = rng.normal_matrix(n, k, 1.0);
    for i in 0..n {
        let row = a.row_mut(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        row.iter_mut().for_each(|v| *v /= norm);
    }
    let nnz = ((density * k as f64).ceil() as usize).min(k);
    let mut x_true = DenseVector::zeros(k);
    for idx in rng.distinct_indices(k, nnz) {
        x_true[idx] = rng.normal(1.0);
    }
    let noise = rng.normal_vector(n, noise_var.sqrt());
    let b = a.matvec(&x_true)?.add(&noise);
    let mu = 0.1 * a.matvec_t(&b)?.max_abs();
    let problem = CappedL1Problem::new(a, b, mu, 1.0)?;
    Ok((problem, x_true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_rows_and_sparsity() {
        let (p, x) = generate_data(30, 101, 0.1, 1e-4, 5).unwrap();
        for i in 0..30 {
            let n: f64 = p.a().row(i).iter().map(|v| v * v).sum();
            assert!((n.sqrt() - 1.0).abs() <= 1e-12);
        }
        assert_eq!(x.iter().filter(|v| **v != 0.0).count(), 11);
        assert_eq!(p.theta(), 1.0);
        assert!((p.mu() - 0.1 * p.a().matvec_t(p.b()).unwrap().max_abs()).abs() < 1e-15);
    }

    #[test]
    fn deterministic_in_seed() {
        let (p1, x1) = generate_data(10, 20, 0.2, 1e-4, 7).unwrap();
        let (p2, x2) = generate_data(10, 20, 0.2, 1e-4, 7).unwrap();
        assert_eq!(p1.a(), p2.a());
        assert_eq!(x1, x2);
        let (p3, _) = generate_data(10, 20, 0.2, 1e-4, 8).unwrap();
        assert_ne!(p1.a(), p3.a());
    }

    #[test]
    fn rejects_bad_density() {
        assert!(generate_data(5, 5, 0.0, 1e-4, 1).is_err());
        assert!(generate_data(5, 5, 1.0, 1e-4, 1).is_err());
    }
}
