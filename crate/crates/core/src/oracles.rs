//! Slow, independent reference computations used to check the closed forms:
//! finite-difference gradients, grid line searches and brute-force scalar
//! minimizers. Nothing here calls into the solvers.

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, DenseVector};

/// Equispaced grid `lo, …, hi` with `points` nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    lo: f64,
    hi: f64,
    points: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo < hi) || points < 2 {
            return Err(Error::InvalidParameter(format!("grid [{lo}, {hi}] with {points} points")));
        }
        Ok(Self { lo, hi, points })
    }

    /// The unit interval sampled at `points` nodes.
    pub fn unit(points: usize) -> Self {
        Self::new(0.0, 1.0, points).expect("valid unit grid")
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn points(&self) -> usize {
        self.points
    }
}

/// Central differences `(f(x + h eᵢ) − f(x − h eᵢ)) / 2h`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Result<DenseVector> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("finite-difference step {step}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = f(&probe);
        probe[i] = x[i] - step;
        let down = f(&probe);
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NumericalFailure(format!("non-finite evaluation at coordinate {i}")));
        }
        grad.push((up - down) / (2.0 * step));
    }
    Ok(DenseVector::from(grad))
}

/// Exhaustive grid minimization; ties go to the smaller argument.
pub fn grid_min_1d(phi: impl Fn(f64) -> f64, grid: GridSpec) -> Result<(f64, f64)> {
    let mut best = (grid.lo, f64::INFINITY);
    for i in 0..grid.points {
        let x = grid.node(i);
        let v = phi(x);
        if !v.is_finite() {
            return Err(Error::NumericalFailure(format!("non-finite value at {x}")));
        }
        if v < best.1 {
            best = (x, v);
        }
    }
    Ok(best)
}

/// Golden-section search on `[lo, hi]` down to interval width `tol`.
pub fn golden_section(phi: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (phi(x1), phi(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = phi(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = phi(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, phi(x))
}

/// Grid search followed by golden-section refinement around every local
/// minimum of the sampled sequence; handles multimodal scalar functions.
pub fn scalar_min(phi: impl Fn(f64) -> f64, grid: GridSpec, tol: f64) -> Result<(f64, f64)> {
    let n = grid.points;
    let values: Vec<f64> = (0..n).map(|i| phi(grid.node(i))).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite value on grid".into()));
    }
    let h = grid.step();
    let mut best = (grid.lo, f64::INFINITY);
    for i in 0..n {
        let left = if i == 0 { f64::INFINITY } else { values[i - 1] };
        let right = if i + 1 == n { f64::INFINITY } else { values[i + 1] };
        if values[i] > left || values[i] > right {
            continue;
        }
        let x = grid.node(i);
        let lo = (x - h).max(grid.lo);
        let hi = (x + h).min(grid.hi);
        let (xr, vr) = golden_section(&phi, lo, hi, tol);
        for (cx, cv) in [(x, values[i]), (xr, vr)] {
            if cv < best.1 || (cv == best.1 && cx < best.0) {
                best = (cx, cv);
            }
        }
    }
    Ok(best)
}

/// Points used by [`scalar_capped_prox_oracle`].
pub const CAPPED_PROX_GRID_POINTS: usize = 1_000_000;

/// Brute-force minimizer of `(w/2)(x − u)² + μ·min(|x|, θ)`.
pub fn scalar_capped_prox_oracle(u: f64, w: f64, mu: f64, theta: f64) -> f64 {
    scalar_capped_prox_oracle_with(u, w, mu, theta, CAPPED_PROX_GRID_POINTS)
}

/// [`scalar_capped_prox_oracle`] with an explicit grid size; the refinement
/// step still resolves the minimizer to 1e-8.
pub fn scalar_capped_prox_oracle_with(u: f64, w: f64, mu: f64, theta: f64, points: usize) -> f64 {
    assert!(w > 0.0, "prox weight must be positive");
    let phi = |x: f64| 0.5 * w * (x - u) * (x - u) + mu * x.abs().min(theta);
    let half = u.abs() + theta + 1.0;
    let grid = GridSpec::new(-half, half, points).expect("nonempty bracket");
    scalar_min(phi, grid, 1e-8).expect("finite objective").0
}

/// Minimizer of `½xᵀHx − gᵀx` for symmetric positive definite `H` by cyclic
/// coordinate descent, `sweeps` passes from `x = 0`.
pub fn quadratic_cd(h: &DenseMatrix, g: &[f64], sweeps: usize) -> Result<DenseVector> {
    let n = h.rows();
    if h.cols() != n || g.len() != n {
        return Err(Error::InvalidArgument(format!("quadratic of shape {:?} with linear term {}", h.shape(), g.len())));
    }
    if (0..n).any(|i| !(h.get(i, i) > 0.0)) {
        return Err(Error::NumericalFailure("nonpositive diagonal in coordinate descent".into()));
    }
    let mut x = vec![0.0; n];
    for _ in 0..sweeps {
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| h.get(i, j) * x[j]).sum();
            x[i] = (g[i] - off) / h.get(i, i);
        }
    }
    Ok(DenseVector::from(x))
}
