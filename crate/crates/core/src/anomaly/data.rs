use crate::anomaly::problem::{AnomalyProblem, AnomalyState};
use crate::error::{Error, Result};
use crate::numerics::{spectral_norm, DenseMatrix, RngStream};

/// Noise standard deviation (variance 0.01).
const NOISE_STD: f64 = 0.1;
/// Probability of each of the anomaly values `−1` and `+1`.
const ANOMALY_PROB: f64 = 0.05;

/// Synthetic traffic instance with ground truth `(P, Q, S)`.
///
/// `D` has i.i.d. uniform `{0, 1}` entries (a column that comes out all zero is
/// redrawn), `S` has entries `−1, 0, 1` with probabilities `0.05, 0.9, 0.05`,
/// `P ~ N(0, 100/I)`, `Q ~ N(0, 100/K)`, `V ~ N(0, 0.01)` and
/// `Y = PQ + DS + V`. Then `λ = 0.1‖Y‖₂` and `μ = 0.1 max|DᵀY|`.
pub fn generate_data(n: usize, k: usize, i: usize, rho: usize, seed: u64) -> Result<(AnomalyProblem, AnomalyState)> {
    if n == 0 || k == 0 || i == 0 || rho == 0 {
        return Err(Error::InvalidParameter(format!("dimensions must be positive, got N={n}, K={k}, I={i}, rho={rho}")));
    }
    if rho > n.min(k) {
        return Err(Error::InvalidParameter(format!("rank {rho} exceeds min(N, K) = {}", n.min(k))));
    }
    let mut rng = RngStream::new(seed);
    let mut d = DenseMatrix::from_fn(n, i, |_, _| if rng.uniform() < 0.5 { 1.0 } else { 0.0 });
    for col in 0..i {
        while (0..n).all(|row| d.get(row, col) == 0.0) {
            for row in 0..n {
                d.set(row, col, if rng.uniform() < 0.5 { 1.0 } else { 0.0 });
            }
        }
    }
    let s = DenseMatrix::from_fn(i, k, |_, _| {
        let u = rng.uniform();
        if u < ANOMALY_PROB {
            -1.0
        } else if u < 2.0 * ANOMALY_PROB {
            1.0
        } else {
            0.0
        }
    });
    let p = rng.normal_matrix(n, rho, (100.0 / i as f64).sqrt());
    let q = rng.normal_matrix(rho, k, (100.0 / k as f64).sqrt());
    let v = rng.normal_matrix(n, k, NOISE_STD);
    let mut y = p.matmul(&q)?;
    y.axpy(1.0, &d.matmul(&s)?)?;
    y.axpy(1.0, &v)?;
    let lambda = 0.1 * spectral_norm(&y)?;
    let mu = 0.1 * d.matmul_tn(&y)?.max_abs();
    let problem = AnomalyProblem::new(y, d, lambda, mu, rho)?;
    Ok((problem, AnomalyState { p, q, s }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_and_well_formed() {
        let (a, za) = generate_data(20, 30, 25, 3, 11).unwrap();
        let (b, zb) = generate_data(20, 30, 25, 3, 11).unwrap();
        assert_eq!(a.y().as_slice(), b.y().as_slice());
        assert_eq!(za, zb);
        assert!(a.d().as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(a.diag_dtd().iter().all(|&v| v > 0.0));
        assert!(za.s.as_slice().iter().all(|&v| v == -1.0 || v == 0.0 || v == 1.0));
        let (c, _) = generate_data(20, 30, 25, 3, 12).unwrap();
        assert_ne!(a.y(), c.y());
    }

    #[test]
    fn tiny_instances_have_no_zero_columns() {
        for seed in 0..20 {
            let (p, _) = generate_data(1, 3, 6, 1, seed).unwrap();
            assert!(p.d().as_slice().iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn regularization_weights_follow_data() {
        let (p, _) = generate_data(15, 10, 12, 2, 1).unwrap();
        let want_mu = 0.1 * p.d().matmul_tn(p.y()).unwrap().max_abs();
        assert_eq!(p.mu(), want_mu);
        let want_lambda = 0.1 * spectral_norm(p.y()).unwrap();
        assert!((p.lambda() - want_lambda).abs() < 1e-12 * want_lambda);
        assert!(generate_data(3, 3, 3, 4, 1).is_err());
    }
}
