use crate::error::{Error, Result};
use crate::numerics::{dot, DenseVector};

/// Objective `h(x) = f(x) + g⁺(x) − g⁻(x)` with smooth `f` and convex `g⁺`, `g⁻`.
///
/// The feasible set is the whole space. Evaluation must be safe to call
/// concurrently from several threads.
pub trait DcProblem: Sync {
    fn dimension(&self) -> usize;

    fn f(&self, x: &[f64]) -> f64;

    fn grad_f(&self, x: &[f64]) -> DenseVector;

    fn gplus(&self, x: &[f64]) -> f64;

    /// Any subgradient of `g⁺` at `x`.
    fn gplus_subgrad(&self, x: &[f64]) -> DenseVector;

    fn gminus(&self, x: &[f64]) -> f64;

    /// One fixed subgradient `ξ⁻(x)` of `g⁻` at `x`.
    fn xi_minus(&self, x: &[f64]) -> DenseVector;

    /// True when `g⁻` vanishes identically (convex regularizer).
    fn gminus_is_zero(&self) -> bool {
        false
    }

    fn h(&self, x: &[f64]) -> f64 {
        self.f(x) + self.gplus(x) - self.gminus(x)
    }
}

/// `g⁺` with a closed-form proximal map.
pub trait ProxGplus: DcProblem {
    /// `argmin_x g⁺(x) + ‖x − v‖² / (2 step)`.
    fn prox_gplus(&self, v: &[f64], step: f64) -> DenseVector;
}

fn check_dims(p: &impl DcProblem, xs: &[&[f64]]) -> Result<()> {
    let n = p.dimension();
    match xs.iter().find(|x| x.len() != n) {
        Some(x) => Err(Error::InvalidArgument(format!("expected dimension {n}, got {}", x.len()))),
        None => Ok(()),
    }
}

/// Majorant `h̄(x; xᵗ) = f(x) − g⁻(xᵗ) − (x − xᵗ)ᵀξ⁻(xᵗ) + g⁺(x)`.
pub fn upper_bound_eval(p: &impl DcProblem, x: &[f64], x_t: &[f64]) -> Result<f64> {
    check_dims(p, &[x, x_t])?;
    let xi = p.xi_minus(x_t);
    let lin: f64 = x.iter().zip(x_t).zip(xi.iter()).map(|((a, b), s)| (a - b) * s).sum();
    Ok(p.f(x) - p.gminus(x_t) - lin + p.gplus(x))
}

/// Signed directional quantity `(𝔹xᵗ − xᵗ)ᵀ(∇f(xᵗ) − ξ⁻(xᵗ)) + g⁺(𝔹xᵗ) − g⁺(xᵗ)`.
///
/// Negative away from fixed points; its magnitude is the stationarity gap.
pub fn directional_gap(p: &impl DcProblem, x_t: &[f64], bx_t: &[f64]) -> Result<f64> {
    check_dims(p, &[x_t, bx_t])?;
    let grad = p.grad_f(x_t);
    let xi = p.xi_minus(x_t);
    Ok(signed_gap(x_t, bx_t, &grad, &xi, p.gplus(x_t), p.gplus(bx_t)))
}

pub(crate) fn signed_gap(x_t: &[f64], bx_t: &[f64], grad: &[f64], xi: &[f64], gplus_x: f64, gplus_bx: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..x_t.len() {
        s += (bx_t[i] - x_t[i]) * (grad[i] - xi[i]);
    }
    s + gplus_bx - gplus_x
}

/// `|(𝔹xᵗ − xᵗ)ᵀ(∇f(xᵗ) − ξ⁻(xᵗ)) + g⁺(𝔹xᵗ) − g⁺(xᵗ)|`, zero exactly at stationary points.
pub fn stationarity_gap(p: &impl DcProblem, x_t: &[f64], bx_t: &[f64]) -> Result<f64> {
    Ok(directional_gap(p, x_t, bx_t)?.abs())
}

/// Threshold below which the directional quantity counts as a strict descent.
pub const DESCENT_EPS: f64 = 1e-12;

/// Whether `𝔹xᵗ − xᵗ` is a descent direction of the majorant at `xᵗ`.
pub fn descent_check(p: &impl DcProblem, x_t: &[f64], bx_t: &[f64]) -> Result<bool> {
    Ok(directional_gap(p, x_t, bx_t)? < -DESCENT_EPS)
}

/// Subgradient inequality `g(y) ≥ g(x) + (y − x)ᵀξ` for a candidate subgradient.
pub fn subgradient_holds(g_x: f64, g_y: f64, x: &[f64], y: &[f64], xi: &[f64], tol: f64) -> bool {
    let lin: f64 = y.iter().zip(x).map(|(a, b)| a - b).zip(xi).map(|(d, s)| d * s).sum();
    g_y >= g_x + lin - tol
}

pub(crate) fn direction(x_t: &[f64], bx_t: &[f64]) -> DenseVector {
    DenseVector::from(bx_t.iter().zip(x_t).map(|(b, x)| b - x).collect::<Vec<_>>())
}

pub(crate) fn is_zero(d: &[f64]) -> bool {
    d.iter().all(|&v| v == 0.0)
}

pub(crate) fn inner(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b)
}
