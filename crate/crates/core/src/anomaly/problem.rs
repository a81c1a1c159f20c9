use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, DenseVector, RngStream};

/// Sparsity-regularized rank minimization
/// `½‖PQ + DS − Y‖² + (λ/2)(‖P‖² + ‖Q‖²) + μ‖S‖₁`.
#[derive(Clone, Debug)]
pub struct AnomalyProblem {
    y: DenseMatrix,
    d: DenseMatrix,
    lambda: f64,
    mu: f64,
    rho: usize,
    diag_dtd: Vec<f64>,
}

impl AnomalyProblem {
    pub fn new(y: DenseMatrix, d: DenseMatrix, lambda: f64, mu: f64, rho: usize) -> Result<Self> {
        if y.rows() != d.rows() {
            return Err(Error::InvalidArgument(format!(
                "observations have {} rows, routing matrix has {}",
                y.rows(),
                d.rows()
            )));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        if rho == 0 || rho > y.rows().min(y.cols()) {
            return Err(Error::InvalidParameter(format!(
                "rank {rho} outside 1..={}",
                y.rows().min(y.cols())
            )));
        }
        if !y.all_finite() || !d.all_finite() {
            return Err(Error::NonFinite("problem data"));
        }
        let diag_dtd = d.col_norms_sq();
        if let Some(i) = diag_dtd.iter().position(|&v| v == 0.0) {
            return Err(Error::InvalidProblem(format!("column {i} of the routing matrix is zero")));
        }
        Ok(Self { y, d, lambda, mu, rho, diag_dtd })
    }

    pub fn y(&self) -> &DenseMatrix {
        &self.y
    }

    pub fn d(&self) -> &DenseMatrix {
        &self.d
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn rho(&self) -> usize {
        self.rho
    }

    /// Diagonal of `DᵀD`.
    pub fn diag_dtd(&self) -> &[f64] {
        &self.diag_dtd
    }

    /// `(N, K, I)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.y.rows(), self.y.cols(), self.d.cols())
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.y.clone(), self.d.clone(), lambda, self.mu, self.rho)
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(self.y.clone(), self.d.clone(), self.lambda, mu, self.rho)
    }

    pub fn check_state(&self, z: &AnomalyState) -> Result<()> {
        let (n, k, i) = self.dims();
        let want = [(n, self.rho), (self.rho, k), (i, k)];
        let got = [z.p.shape(), z.q.shape(), z.s.shape()];
        if want != got {
            return Err(Error::InvalidArgument(format!("state shapes {got:?}, expected {want:?}")));
        }
        Ok(())
    }

    /// `PQ + DS − Y`.
    pub fn residual(&self, z: &AnomalyState) -> Result<DenseMatrix> {
        self.check_state(z)?;
        let w = self.y.sub(&self.d.matmul(&z.s)?)?;
        z.p.matmul(&z.q)?.sub(&w)
    }

    /// Smooth part `½‖PQ + DS − Y‖² + (λ/2)(‖P‖² + ‖Q‖²)`.
    pub fn f(&self, z: &AnomalyState) -> Result<f64> {
        let r = self.residual(z)?;
        Ok(0.5 * r.frobenius_sq() + 0.5 * self.lambda * (z.p.frobenius_sq() + z.q.frobenius_sq()))
    }

    /// Gradient blocks of the smooth part: `(RQᵀ + λP, PᵀR + λQ, DᵀR)`.
    pub fn grad_f(&self, z: &AnomalyState) -> Result<AnomalyState> {
        let r = self.residual(z)?;
        let mut gp = r.matmul_nt(&z.q)?;
        gp.axpy(self.lambda, &z.p)?;
        let mut gq = z.p.matmul_tn(&r)?;
        gq.axpy(self.lambda, &z.q)?;
        let gs = self.d.matmul_tn(&r)?;
        Ok(AnomalyState { p: gp, q: gq, s: gs })
    }

    /// Default start: `P`, `Q` with `N(0, 1/ρ)` entries, `S = 0`.
    pub fn default_start(&self, seed: u64) -> AnomalyState {
        let (n, k, i) = self.dims();
        let mut rng = RngStream::new(seed);
        let std = (1.0 / self.rho as f64).sqrt();
        let p = rng.normal_matrix(n, self.rho, std);
        let q = rng.normal_matrix(self.rho, k, std);
        AnomalyState { p, q, s: DenseMatrix::zeros(i, k) }
    }

    pub fn zero_state(&self) -> AnomalyState {
        let (n, k, i) = self.dims();
        AnomalyState {
            p: DenseMatrix::zeros(n, self.rho),
            q: DenseMatrix::zeros(self.rho, k),
            s: DenseMatrix::zeros(i, k),
        }
    }
}

/// Iterate `Z = (P, Q, S)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalyState {
    pub p: DenseMatrix,
    pub q: DenseMatrix,
    pub s: DenseMatrix,
}

impl AnomalyState {
    /// Concatenation `vec(P) ++ vec(Q) ++ vec(S)` (row-major blocks).
    pub fn flatten(&self) -> DenseVector {
        let mut v = Vec::with_capacity(self.p.as_slice().len() + self.q.as_slice().len() + self.s.as_slice().len());
        v.extend_from_slice(self.p.as_slice());
        v.extend_from_slice(self.q.as_slice());
        v.extend_from_slice(self.s.as_slice());
        DenseVector::from(v)
    }

    /// Inverse of [`flatten`](Self::flatten) for the shapes of `p`.
    pub fn unflatten(p: &AnomalyProblem, x: &[f64]) -> Result<Self> {
        let (n, k, i) = p.dims();
        let r = p.rho();
        let (np, nq, ns) = (n * r, r * k, i * k);
        if x.len() != np + nq + ns {
            return Err(Error::InvalidArgument(format!("flat state of length {}, expected {}", x.len(), np + nq + ns)));
        }
        Ok(Self {
            p: DenseMatrix::new(n, r, x[..np].to_vec())?,
            q: DenseMatrix::new(r, k, x[np..np + nq].to_vec())?,
            s: DenseMatrix::new(i, k, x[np + nq..].to_vec())?,
        })
    }

    /// `self + γ·dir`, blockwise.
    pub fn step(&self, gamma: f64, dir: &AnomalyState) -> Result<Self> {
        let mut out = self.clone();
        out.p.axpy(gamma, &dir.p)?;
        out.q.axpy(gamma, &dir.q)?;
        out.s.axpy(gamma, &dir.s)?;
        Ok(out)
    }

    /// `self − other`, blockwise.
    pub fn sub(&self, other: &AnomalyState) -> Result<Self> {
        Ok(Self { p: self.p.sub(&other.p)?, q: self.q.sub(&other.q)?, s: self.s.sub(&other.s)? })
    }

    pub fn max_abs(&self) -> f64 {
        self.p.max_abs().max(self.q.max_abs()).max(self.s.max_abs())
    }
}

/// `½‖PQ + DS − Y‖² + (λ/2)(‖P‖² + ‖Q‖²) + μ‖S‖₁`.
pub fn objective(p: &AnomalyProblem, z: &AnomalyState) -> Result<f64> {
    Ok(p.f(z)? + p.mu * z.s.l1_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::fd_gradient;

    fn scalar_problem() -> AnomalyProblem {
        AnomalyProblem::new(DenseMatrix::from_rows(&[&[2.0]]), DenseMatrix::from_rows(&[&[1.0]]), 1.0, 1.0, 1).unwrap()
    }

    fn scalar_state(p: f64, q: f64, s: f64) -> AnomalyState {
        AnomalyState {
            p: DenseMatrix::from_rows(&[&[p]]),
            q: DenseMatrix::from_rows(&[&[q]]),
            s: DenseMatrix::from_rows(&[&[s]]),
        }
    }

    #[test]
    fn objective_examples() {
        let p = scalar_problem();
        assert_eq!(objective(&p, &scalar_state(1.0, 1.0, 1.0)).unwrap(), 2.0);
        assert_eq!(objective(&p, &p.zero_state()).unwrap(), 2.0);

        let mut rng = RngStream::new(3);
        let pm = rng.normal_matrix(4, 2, 1.0);
        let qm = rng.normal_matrix(2, 5, 1.0);
        let d = DenseMatrix::from_fn(4, 3, |i, j| ((i + j) % 2) as f64 + if i == j { 1.0 } else { 0.0 });
        let y = pm.matmul(&qm).unwrap();
        let prob = AnomalyProblem::new(y, d, 0.3, 0.2, 2).unwrap();
        let z = AnomalyState { p: pm.clone(), q: qm.clone(), s: DenseMatrix::zeros(3, 5) };
        let want = 0.15 * (pm.frobenius_sq() + qm.frobenius_sq());
        assert!((objective(&prob, &z).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn construction_checks() {
        let y = DenseMatrix::zeros(3, 4);
        let d = DenseMatrix::from_fn(3, 2, |_, _| 1.0);
        assert!(AnomalyProblem::new(y.clone(), d.clone(), 0.0, 1.0, 1).is_err());
        assert!(AnomalyProblem::new(y.clone(), d.clone(), 1.0, -1.0, 1).is_err());
        assert!(AnomalyProblem::new(y.clone(), d.clone(), 1.0, 1.0, 4).is_err());
        assert!(AnomalyProblem::new(y.clone(), DenseMatrix::zeros(3, 2), 1.0, 1.0, 1).is_err());
        let p = AnomalyProblem::new(y, d, 1.0, 1.0, 2).unwrap();
        assert_eq!(p.diag_dtd(), &[3.0, 3.0]);
        assert!(objective(&p, &scalar_state(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn flatten_round_trip() {
        let p = AnomalyProblem::new(
            RngStream::new(1).normal_matrix(4, 5, 1.0),
            DenseMatrix::from_fn(4, 3, |_, _| 1.0),
            1.0,
            1.0,
            2,
        )
        .unwrap();
        let z = p.default_start(5);
        assert_eq!(AnomalyState::unflatten(&p, &z.flatten()).unwrap(), z);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngStream::new(2);
        let d = DenseMatrix::from_fn(5, 4, |_, _| if rng.uniform() < 0.5 { 1.0 } else { 0.0 })
.add(&DenseMatrix::from_fn(5, 4, |i, j| if i == j { 1.0 } else { 0.0 }))
            .unwrap();
        let p = AnomalyProblem::new(rng.normal_matrix(5, 6, 1.0), d, 0.4, 0.3, 2).unwrap();
        for seed in 0..10 {
            let mut z = p.default_start(seed);
            z.s = RngStream::new(100 + seed).normal_matrix(4, 6, 1.0);
            let g = p.grad_f(&z).unwrap().flatten();
            let fd = fd_gradient(|x| p.f(&AnomalyState::unflatten(&p, x).unwrap()).unwrap(), &z.flatten(), 1e-5)
                .unwrap();
            for k in 0..g.len() {
                assert!((g[k] - fd[k]).abs() <= 1e-5 * g[k].abs().max(1.0), "{k}: {} vs {}", g[k], fd[k]);
            }
        }
    }
}
