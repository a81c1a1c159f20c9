use crate::error::{Error, Result};
use crate::numerics::DenseVector;
use crate::sca::problem::ProxGplus;

/// Solver for the convex approximate problem
/// `min_x f̃(x; xᵗ) − (x − xᵗ)ᵀξ⁻(xᵗ) + g⁺(x)`.
pub trait Surrogate {
    /// Best response `𝔹xᵗ`.
    fn solve(&self, x_t: &DenseVector, xi_minus: &DenseVector) -> Result<DenseVector>;

    fn description(&self) -> &str;

    /// `f̃(x; xᵗ)` up to an additive constant, when available in closed form.
    fn approx_f(&self, _x: &[f64], _x_t: &[f64]) -> Option<f64> {
        None
    }
}

/// Linearized `f` plus a proximal term `(c/2)‖x − xᵗ‖²`.
pub struct ProximalSurrogate<'a, P> {
    problem: &'a P,
    c: f64,
}

pub fn proximal_surrogate<P: ProxGplus>(problem: &P, c_t: f64) -> Result<ProximalSurrogate<'_, P>> {
    if !(c_t > 0.0) || !c_t.is_finite() {
        return Err(Error::InvalidParameter(format!("proximal weight must be positive, got {c_t}")));
    }
    Ok(ProximalSurrogate { problem, c: c_t })
}

impl<P: ProxGplus> ProximalSurrogate<'_, P> {
    pub fn weight(&self) -> f64 {
        self.c
    }
}

impl<P: ProxGplus> Surrogate for ProximalSurrogate<'_, P> {
    fn solve(&self, x_t: &DenseVector, xi_minus: &DenseVector) -> Result<DenseVector> {
        let grad = self.problem.grad_f(x_t);
        let v: Vec<f64> = x_t
            .iter()
            .zip(grad.iter())
            .zip(xi_minus.iter())
            .map(|((x, g), xi)| x - (g - xi) / self.c)
            .collect();
        Ok(self.problem.prox_gplus(&v, 1.0 / self.c))
    }

    fn description(&self) -> &str {
        "proximal"
    }

    fn approx_f(&self, x: &[f64], x_t: &[f64]) -> Option<f64> {
        let grad = self.problem.grad_f(x_t);
        let mut lin = 0.0;
        let mut quad = 0.0;
        for i in 0..x.len() {
            let d = x[i] - x_t[i];
            lin += grad[i] * d;
            quad += d * d;
        }
        Some(self.problem.f(x_t) + lin + 0.5 * self.c * quad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capped_l1::CappedL1Problem;
    use crate::sca::problem::DcProblem;
    use crate::numerics::{shrink, DenseMatrix, RngStream};
    use crate::oracles::{fd_gradient, scalar_min, GridSpec};

    #[test]
    fn proximal_example() {
        let p = CappedL1Problem::lasso(DenseMatrix::from_rows(&[&[1.0]]), vec![4.0].into(), 1.0).unwrap();
        let s = proximal_surrogate(&p, 1.0).unwrap();
        let bx = s.solve(&vec![0.0].into(), &vec![0.0].into()).unwrap();
        assert_eq!(bx[0], 3.0);
        // brute force over the scalar surrogate objective
        let phi = |x: f64| -4.0 * x + 0.5 * x * x + x.abs();
        let (xo, _) = scalar_min(phi, GridSpec::new(-10.0, 10.0, 2001).unwrap(), 1e-10).unwrap();
        assert!((xo - 3.0).abs() < 1e-6);
        assert!(proximal_surrogate(&p, 0.0).is_err());
        assert!(proximal_surrogate(&p, -1.0).is_err());
    }

    #[test]
    fn fixed_point_when_gradient_matches_xi() {
        // b = 0 gives ∇f(0) = 0 = ξ⁻(0)
        let p = CappedL1Problem::lasso(DenseMatrix::identity(2), vec![0.0, 0.0].into(), 0.5).unwrap();
        let s = proximal_surrogate(&p, 2.0).unwrap();
        let bx = s.solve(&vec![0.0, 0.0].into(), &vec![0.0, 0.0].into()).unwrap();
        assert_eq!(&bx[..], &[0.0, 0.0]);
        assert_eq!(shrink(0.0, 0.25), 0.0);
    }

    #[test]
    fn gradient_consistency() {
        let mut rng = RngStream::new(17);
        let a = rng.normal_matrix(6, 4, 1.0);
        let b = rng.normal_vector(6, 1.0);
        let p = CappedL1Problem::new(a, b, 0.3, 0.8).unwrap();
        let s = proximal_surrogate(&p, 5.0).unwrap();
        for _ in 0..20 {
            let x_t = rng.normal_vector(4, 1.0);
            let fd = fd_gradient(|x| s.approx_f(x, &x_t).unwrap(), &x_t, 1e-5).unwrap();
            let g = p.grad_f(&x_t);
            for i in 0..4 {
                assert!((fd[i] - g[i]).abs() <= 1e-5 * g[i].abs().max(1.0));
            }
        }
    }
}
