use crate::error::{Error, Result};
use crate::numerics::{shrink, DenseMatrix, DenseVector};
use crate::sca::{DcProblem, ProxGplus, Surrogate};

/// `½‖Ax − b‖² + μ Σₖ min(|xₖ|, θ)`, split as `f = ½‖Ax − b‖²`,
/// `g⁺ = μ‖x‖₁`, `g⁻ = μ Σₖ max(|xₖ| − θ, 0)`.
///
/// `θ = ∞` gives the LASSO.
#[derive(Clone, Debug)]
pub struct CappedL1Problem {
    a: DenseMatrix,
    b: DenseVector,
    mu: f64,
    theta: f64,
    diag_ata: Vec<f64>,
}

impl CappedL1Problem {
    pub fn new(a: DenseMatrix, b: DenseVector, mu: f64, theta: f64) -> Result<Self> {
        if a.rows() != b.len() {
            return Err(Error::InvalidArgument(format!(
                "dictionary has {} rows, measurements have length {}",
                a.rows(),
                b.len()
            )));
        }
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        if !(theta > 0.0) {
            return Err(Error::InvalidParameter(format!("theta must be positive, got {theta}")));
        }
        if !a.all_finite() || !b.all_finite() {
            return Err(Error::NonFinite("problem data"));
        }
        let diag_ata = a.col_norms_sq();
        if let Some(k) = diag_ata.iter().position(|&d| d == 0.0) {
            return Err(Error::InvalidProblem(format!("column {k} of the dictionary is zero")));
        }
        Ok(Self { a, b, mu, theta, diag_ata })
    }

    /// The `θ → ∞` limit: `½‖Ax − b‖² + μ‖x‖₁`.
    pub fn lasso(a: DenseMatrix, b: DenseVector, mu: f64) -> Result<Self> {
        Self::new(a, b, mu, f64::INFINITY)
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &DenseVector {
        &self.b
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `diag(AᵀA)`, computed once at construction.
    pub fn diag_ata(&self) -> &[f64] {
        &self.diag_ata
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), mu, self.theta)
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.mu, theta)
    }

    /// `Ax − b`.
    pub fn residual(&self, x: &[f64]) -> DenseVector {
        self.a.matvec(x).expect("dimension checked by caller").sub(&self.b)
    }

    /// `μ Σₖ min(|xₖ|, θ)`.
    pub fn capped_penalty(&self, x: &[f64]) -> f64 {
        self.mu * x.iter().map(|v| v.abs().min(self.theta)).sum::<f64>()
    }

    /// Objective from a precomputed residual `Ax − b`.
    pub fn h_from_residual(&self, residual: &[f64], x: &[f64]) -> f64 {
        0.5 * residual.iter().map(|r| r * r).sum::<f64>() + self.capped_penalty(x)
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.cols() {
            return Err(Error::InvalidArgument(format!("expected length {}, got {}", self.cols(), x.len())));
        }
        Ok(())
    }
}

/// `½‖Ax − b‖² + μ Σₖ min(|xₖ|, θ)`.
pub fn h_eval(p: &CappedL1Problem, x: &[f64]) -> Result<f64> {
    p.check_len(x)?;
    Ok(p.h_from_residual(&p.residual(x), x))
}

/// Subgradient of `g⁻`: `μ` where `xₖ ≥ θ`, `−μ` where `xₖ ≤ −θ`, else 0.
pub fn xi_minus(p: &CappedL1Problem, x: &[f64]) -> DenseVector {
    let (mu, theta) = (p.mu, p.theta);
    DenseVector::from(
        x.iter()
            .map(|&v| {
                if v >= theta {
                    mu
                } else if v <= -theta {
                    -mu
                } else {
                    0.0
                }
            })
            .collect::<Vec<_>>(),
    )
}

impl DcProblem for CappedL1Problem {
    fn dimension(&self) -> usize {
        self.cols()
    }

    fn f(&self, x: &[f64]) -> f64 {
        0.5 * self.residual(x).norm_sq()
    }

    fn grad_f(&self, x: &[f64]) -> DenseVector {
        self.a.matvec_t(&self.residual(x)).expect("conforming")
    }

    fn gplus(&self, x: &[f64]) -> f64 {
        self.mu * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn gplus_subgrad(&self, x: &[f64]) -> DenseVector {
        DenseVector::from(x.iter().map(|&v| self.mu * sign(v)).collect::<Vec<_>>())
    }

    fn gminus(&self, x: &[f64]) -> f64 {
        if self.theta.is_infinite() {
            return 0.0;
        }
        self.mu * x.iter().map(|v| (v.abs() - self.theta).max(0.0)).sum::<f64>()
    }

    fn xi_minus(&self, x: &[f64]) -> DenseVector {
        xi_minus(self, x)
    }

    fn gminus_is_zero(&self) -> bool {
        self.theta.is_infinite()
    }

    fn h(&self, x: &[f64]) -> f64 {
        self.h_from_residual(&self.residual(x), x)
    }
}

impl ProxGplus for CappedL1Problem {
    fn prox_gplus(&self, v: &[f64], step: f64) -> DenseVector {
        let tau = self.mu * step;
        DenseVector::from(v.iter().map(|&x| shrink(x, tau)).collect::<Vec<_>>())
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Per-coordinate (Jacobi) best-response surrogate
/// `f̃(x; xᵗ) = Σₖ ½‖aₖxₖ + Σ_{j≠k} aⱼxⱼᵗ − b‖²`.
pub struct JacobiSurrogate<'a> {
    problem: &'a CappedL1Problem,
}

impl<'a> JacobiSurrogate<'a> {
    pub fn new(problem: &'a CappedL1Problem) -> Self {
        Self { problem }
    }
}

impl Surrogate for JacobiSurrogate<'_> {
    fn solve(&self, x_t: &DenseVector, xi_minus: &DenseVector) -> Result<DenseVector> {
        let grad = self.problem.grad_f(x_t);
        Ok(super::stela::direction_from(self.problem, x_t, &grad, xi_minus))
    }

    fn description(&self) -> &str {
        "jacobi best-response"
    }

    fn approx_f(&self, x: &[f64], x_t: &[f64]) -> Option<f64> {
        let p = self.problem;
        let r = p.residual(x_t);
        let g = p.a.matvec_t(&r).ok()?;
        let base = 0.5 * r.norm_sq();
        let mut total = 0.0;
        for k in 0..x.len() {
            let dk = x[k] - x_t[k];
            total += base + dk * g[k] + 0.5 * p.diag_ata[k] * dk * dk;
        }
        Some(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use crate::oracles::fd_gradient;
    use crate::sca::subgradient_holds;

    #[test]
    fn construction_checks() {
        let a = DenseMatrix::identity(2);
        let b: DenseVector = vec![1.0, 2.0].into();
        assert!(CappedL1Problem::new(a.clone(), b.clone(), 0.0, 1.0).is_err());
        assert!(CappedL1Problem::new(a.clone(), b.clone(), 1.0, 0.0).is_err());
        assert!(CappedL1Problem::new(a.clone(), vec![1.0].into(), 1.0, 1.0).is_err());
        let zero_col = DenseMatrix::from_rows(&[&[1.0, 0.0], &[2.0, 0.0]]);
        assert!(matches!(CappedL1Problem::new(zero_col, b.clone(), 1.0, 1.0), Err(Error::InvalidProblem(_))));
        let p = CappedL1Problem::new(a, b, 1.0, 1.0).unwrap();
        assert_eq!(p.diag_ata(), &[1.0, 1.0]);
    }

    #[test]
    fn h_examples() {
        let mut rng = RngStream::new(1);
        let a = rng.normal_matrix(4, 3, 1.0);
        let b = rng.normal_vector(4, 1.0);
        let p = CappedL1Problem::new(a.clone(), b.clone(), 1.0, 1.0).unwrap();
        assert!((h_eval(&p, &[0.0; 3]).unwrap() - 0.5 * b.norm_sq()).abs() < 1e-14);
        assert_eq!(p.capped_penalty(&[2.0, -0.5, 0.0]), 1.5);
        assert!(h_eval(&p, &[0.0; 2]).is_err());

        let huge = CappedL1Problem::new(a.clone(), b.clone(), 0.3, 1e12).unwrap();
        let lasso = CappedL1Problem::lasso(a, b, 0.3).unwrap();
        let x = [1.5, -4.0, 0.2];
        let want = 0.5 * lasso.residual(&x).norm_sq() + 0.3 * 5.7;
        assert!((h_eval(&huge, &x).unwrap() - want).abs() < 1e-12);
        assert!((h_eval(&lasso, &x).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn dc_split_reassembles_objective() {
        let mut rng = RngStream::new(2);
        let p = CappedL1Problem::new(rng.normal_matrix(5, 4, 1.0), rng.normal_vector(5, 1.0), 0.7, 0.8).unwrap();
        for _ in 0..100 {
            let x = rng.normal_vector(4, 1.5);
            let split = p.f(&x) + p.gplus(&x) - p.gminus(&x);
            assert!((split - p.h(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn xi_minus_examples() {
        let p = CappedL1Problem::new(DenseMatrix::identity(3), vec![0.0; 3].into(), 0.1, 1.0).unwrap();
        assert_eq!(&xi_minus(&p, &[2.0, -0.5, -3.0])[..], &[0.1, 0.0, -0.1]);
        assert_eq!(&xi_minus(&p, &[1.0, -1.0, 0.999])[..], &[0.1, -0.1, 0.0]);
    }

    #[test]
    fn xi_minus_is_a_subgradient() {
        let mut rng = RngStream::new(3);
        let p = CappedL1Problem::new(DenseMatrix::identity(4), vec![0.0; 4].into(), 0.4, 1.0).unwrap();
        for _ in 0..10_000 {
            let x = rng.normal_vector(4, 1.5);
            let y = rng.normal_vector(4, 1.5);
            let xi = p.xi_minus(&x);
            assert!(subgradient_holds(p.gminus(&x), p.gminus(&y), &x, &y, &xi, 1e-12));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngStream::new(4);
        let p = CappedL1Problem::new(rng.normal_matrix(6, 5, 1.0), rng.normal_vector(6, 1.0), 0.2, 1.0).unwrap();
        for _ in 0..20 {
            let x = rng.normal_vector(5, 1.0);
            let fd = fd_gradient(|v| p.f(v), &x, 1e-5).unwrap();
            let g = p.grad_f(&x);
            for k in 0..5 {
                assert!((fd[k] - g[k]).abs() <= 1e-5 * g[k].abs().max(1.0));
            }
        }
    }

    #[test]
    fn jacobi_surrogate_gradient_consistency() {
        let mut rng = RngStream::new(5);
        let p = CappedL1Problem::new(rng.normal_matrix(7, 5, 1.0), rng.normal_vector(7, 1.0), 0.2, 1.0).unwrap();
        let s = JacobiSurrogate::new(&p);
        for _ in 0..20 {
            let x_t = rng.normal_vector(5, 1.0);
            let fd = fd_gradient(|v| s.approx_f(v, &x_t).unwrap(), &x_t, 1e-5).unwrap();
            let g = p.grad_f(&x_t);
            for k in 0..5 {
                assert!((fd[k] - g[k]).abs() <= 1e-5 * g[k].abs().max(1.0));
            }
        }
    }
}
