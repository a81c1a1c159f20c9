//! Stepsize rules operating on the differentiable majorant
//! `f(xᵗ + γd) + γ·(g⁺(𝔹xᵗ) − g⁺(xᵗ) − dᵀξ⁻(xᵗ))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseVector;
use crate::sca::problem::{direction, inner, is_zero, DcProblem};

/// Interval width at which bisection stops.
pub const BISECTION_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum LineSearchSpec {
    /// Minimize the majorant model over `[0, 1]`.
    Exact,
    /// Armijo backtracking `γ = βᵐ` on the majorant model.
    Successive { alpha: f64, beta: f64, m_max: usize },
    /// Fixed stepsize; monotone decrease is then the caller's responsibility.
    Constant { gamma: f64 },
}

impl Default for LineSearchSpec {
    fn default() -> Self {
        LineSearchSpec::Exact
    }
}

impl LineSearchSpec {
    pub fn successive(alpha: f64, beta: f64) -> Self {
        LineSearchSpec::Successive { alpha, beta, m_max: 100 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LineSearchSpec::Exact => Ok(()),
            LineSearchSpec::Successive { alpha, beta, .. } => {
                if !(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "successive line search needs alpha, beta in (0,1), got {alpha}, {beta}"
                    )));
                }
                Ok(())
            }
            LineSearchSpec::Constant { gamma } => {
                if !(gamma > 0.0 && gamma <= 1.0) {
                    return Err(Error::InvalidParameter(format!("constant stepsize {gamma} not in (0,1]")));
                }
                Ok(())
            }
        }
    }
}

/// Quantities shared by the stop test and both line searches; `g⁺(𝔹xᵗ)` is
/// evaluated once when this is built.
pub(crate) struct StepContext {
    pub f_x: f64,
    pub grad: DenseVector,
    pub xi: DenseVector,
    pub dir: DenseVector,
    pub gplus_x: f64,
    pub gplus_bx: f64,
}

impl StepContext {
    pub fn new(p: &impl DcProblem, x_t: &[f64], bx_t: &[f64]) -> Self {
        Self::with_xi(p, x_t, bx_t, p.xi_minus(x_t))
    }

    pub fn with_xi(p: &impl DcProblem, x_t: &[f64], bx_t: &[f64], xi: DenseVector) -> Self {
        Self {
            f_x: p.f(x_t),
            grad: p.grad_f(x_t),
            xi,
            dir: direction(x_t, bx_t),
            gplus_x: p.gplus(x_t),
            gplus_bx: p.gplus(bx_t),
        }
    }

    /// `dᵀ(∇f − ξ⁻) + g⁺(𝔹xᵗ) − g⁺(xᵗ)`.
    pub fn signed_gap(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dir.len() {
            s += self.dir[i] * (self.grad[i] - self.xi[i]);
        }
        s + self.gplus_bx - self.gplus_x
    }

    /// Slope of the majorant model contributed by the nonsmooth part.
    pub fn delta_gplus(&self) -> f64 {
        self.gplus_bx - self.gplus_x - inner(&self.dir, &self.xi)
    }
}

/// Exact minimization of `φ(γ) = f(xᵗ + γd) + γ·delta_gplus` over `[0, 1]`
/// for `f` convex along the segment, by bisection on `φ′`.
pub fn exact_line_search_convex(p: &impl DcProblem, x_t: &[f64], bx_t: &[f64], delta_gplus: f64) -> Result<f64> {
    let d = direction(x_t, bx_t);
    exact_along(p, x_t, &d, delta_gplus)
}

pub(crate) fn exact_along(p: &impl DcProblem, x_t: &[f64], d: &[f64], delta_gplus: f64) -> Result<f64> {
    if is_zero(d) {
        return Ok(0.0);
    }
    let slope = |g: f64| -> Result<f64> {
        let x: Vec<f64> = x_t.iter().zip(d).map(|(x, d)| x + g * d).collect();
        let v = inner(&p.grad_f(&x), d) + delta_gplus;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NumericalFailure(format!("non-finite line-search slope at γ = {g}")))
        }
    };
    if slope(0.0)? >= 0.0 {
        return Ok(0.0);
    }
    if slope(1.0)? <= 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if slope(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Armijo backtracking on the majorant model: the smallest `m ≤ m_max` with
/// `f(xᵗ+βᵐd) − βᵐdᵀξ⁻ + βᵐ(g⁺(𝔹xᵗ) − g⁺(xᵗ)) ≤ f(xᵗ) + αβᵐ·(dᵀ(∇f − ξ⁻) + g⁺(𝔹xᵗ) − g⁺(xᵗ))`.
///
/// Must only be called along a descent direction.
pub fn successive_line_search(
    p: &impl DcProblem,
    x_t: &[f64],
    bx_t: &[f64],
    alpha: f64,
    beta: f64,
    m_max: usize,
) -> Result<f64> {
    LineSearchSpec::Successive { alpha, beta, m_max }.validate()?;
    let ctx = StepContext::new(p, x_t, bx_t);
    successive_with(p, x_t, &ctx, alpha, beta, m_max)
}

pub(crate) fn successive_with(
    p: &impl DcProblem,
    x_t: &[f64],
    ctx: &StepContext,
    alpha: f64,
    beta: f64,
    m_max: usize,
) -> Result<f64> {
    let decrease = ctx.signed_gap();
    if !(decrease < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "successive line search along a non-descent direction (slope {decrease})"
        )));
    }
    let d_xi = inner(&ctx.dir, &ctx.xi);
    let dg = ctx.gplus_bx - ctx.gplus_x;
    let mut gamma = 1.0;
    for _ in 0..=m_max {
        let x: Vec<f64> = x_t.iter().zip(ctx.dir.iter()).map(|(x, d)| x + gamma * d).collect();
        let lhs = p.f(&x) - gamma * d_xi + gamma * dg;
        if !lhs.is_finite() {
            return Err(Error::NumericalFailure(format!("non-finite model value at γ = {gamma}")));
        }
        if lhs <= ctx.f_x + alpha * gamma * decrease {
            return Ok(gamma);
        }
        gamma *= beta;
    }
    Err(Error::LineSearchFailure { attempts: m_max + 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capped_l1::CappedL1Problem;
    use crate::numerics::{DenseMatrix, RngStream};
    use crate::oracles::{grid_min_1d, GridSpec};
    use crate::sca::problem::descent_check;

    fn lasso_1d() -> CappedL1Problem {
        CappedL1Problem::lasso(DenseMatrix::from_rows(&[&[1.0]]), vec![4.0].into(), 1.0).unwrap()
    }

    #[test]
    fn exact_examples() {
        let p = lasso_1d();
        assert_eq!(exact_line_search_convex(&p, &[0.0], &[3.0], 3.0).unwrap(), 1.0);
        assert_eq!(exact_line_search_convex(&p, &[2.0], &[2.0], 3.0).unwrap(), 0.0);
        // φ′(0) ≥ 0 gives zero
        assert_eq!(exact_line_search_convex(&p, &[0.0], &[3.0], 20.0).unwrap(), 0.0);
    }

    #[test]
    fn exact_matches_grid_on_random_quadratics() {
        let mut rng = RngStream::new(23);
        for _ in 0..100 {
            let a = rng.normal_matrix(5, 3, 1.0);
            let b = rng.normal_vector(5, 2.0);
            let p = CappedL1Problem::lasso(a, b, 0.1).unwrap();
            let x = rng.normal_vector(3, 1.0);
            let bx = rng.normal_vector(3, 1.0);
            let delta = rng.normal(1.0);
            let g = exact_line_search_convex(&p, &x, &bx, delta).unwrap();
            let phi = |t: f64| {
                let y: Vec<f64> = x.iter().zip(bx.iter()).map(|(x, b)| x + t * (b - x)).collect();
                p.f(&y) + t * delta
            };
            let (go, vo) = grid_min_1d(phi, GridSpec::unit(10_001)).unwrap();
            assert!((g - go).abs() <= 1e-4 + 1e-6 || phi(g) <= vo + 1e-12, "{g} vs {go}");
            assert!(phi(g) <= vo + 1e-10);
        }
    }

    #[test]
    fn successive_examples() {
        let p = lasso_1d();
        assert_eq!(successive_line_search(&p, &[0.0], &[3.0], 0.5, 0.5, 30).unwrap(), 1.0);
        // limit α → 0⁺ accepts the unit step when the majorant decreases at γ = 1
        assert_eq!(successive_line_search(&p, &[0.0], &[3.0], 1e-12, 0.5, 30).unwrap(), 1.0);
        assert!(matches!(
            successive_line_search(&p, &[3.0], &[3.0], 0.5, 0.5, 30),
            Err(Error::InvalidArgument(_))
        ));
        assert!(successive_line_search(&p, &[0.0], &[3.0], 1.5, 0.5, 30).is_err());
    }

    #[test]
    fn successive_backtracks_for_long_directions() {
        let p = lasso_1d();
        // overshooting direction: 0 → 10 with f = ½(x − 4)²
        assert!(descent_check(&p, &[0.0], &[10.0]).unwrap());
        let g = successive_line_search(&p, &[0.0], &[10.0], 0.5, 0.5, 30).unwrap();
        assert!(g < 1.0 && g > 0.0);
    }

    #[test]
    fn spec_validation() {
        assert!(LineSearchSpec::Exact.validate().is_ok());
        assert!(LineSearchSpec::Constant { gamma: 1.0 }.validate().is_ok());
        assert!(LineSearchSpec::Constant { gamma: 0.0 }.validate().is_err());
        assert!(LineSearchSpec::successive(0.3, 1.0).validate().is_err());
    }
}
