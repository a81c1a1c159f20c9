use rayon::prelude::*;

use crate::capped_l1::problem::{xi_minus, CappedL1Problem};
use crate::error::{Error, Result};
use crate::numerics::{dot, shrink, DenseVector};
use crate::sca::trace::{IterationCounters, IterationTrace, SolveReport, Stopwatch};
use crate::sca::MONOTONE_TOL;

/// Coordinates above which the best response is computed on the rayon pool.
const PAR_COORDS: usize = 4096;

/// The residual is recomputed from scratch at this cadence to bound drift.
const RESIDUAL_REFRESH: usize = 100;

/// Best response `diag(AᵀA)⁻¹ ∘ S_μ(diag(AᵀA)∘xᵗ + ξ⁻(xᵗ) − Aᵀ(Axᵗ − b))`.
pub fn stela_direction(p: &CappedL1Problem, x_t: &[f64]) -> Result<DenseVector> {
    check_len(p, x_t)?;
    let grad = p.a().matvec_t(&p.residual(x_t))?;
    Ok(direction_from(p, x_t, &grad, &xi_minus(p, x_t)))
}

pub(crate) fn direction_from(p: &CappedL1Problem, x: &[f64], grad: &[f64], xi: &[f64]) -> DenseVector {
    let (d, mu) = (p.diag_ata(), p.mu());
    let coord = |k: usize| shrink(d[k] * x[k] + xi[k] - grad[k], mu) / d[k];
    let out: Vec<f64> = if x.len() >= PAR_COORDS {
        (0..x.len()).into_par_iter().map(coord).collect()
    } else {
        (0..x.len()).map(coord).collect()
    };
    DenseVector::from(out)
}

/// Closed-form exact stepsize along `𝔹xᵗ − xᵗ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stepsize {
    pub gamma: f64,
    /// `A` maps the direction to zero; the model is linear and `γ = 1` was taken.
    pub degenerate: bool,
}

/// `[((ξ⁻ − Aᵀ(Axᵗ − b))ᵀd − μ(‖𝔹xᵗ‖₁ − ‖xᵗ‖₁)) / ‖Ad‖²]₀¹` with `d = 𝔹xᵗ − xᵗ`.
pub fn stela_stepsize(p: &CappedL1Problem, x_t: &[f64], bx: &[f64]) -> Result<Stepsize> {
    check_len(p, x_t)?;
    check_len(p, bx)?;
    let d: Vec<f64> = bx.iter().zip(x_t).map(|(b, x)| b - x).collect();
    if d.iter().all(|&v| v == 0.0) {
        return Ok(Stepsize { gamma: 0.0, degenerate: false });
    }
    let grad = p.a().matvec_t(&p.residual(x_t))?;
    let xi = xi_minus(p, x_t);
    let ad = p.a().matvec(&d)?;
    let numerator = step_numerator(p, x_t, bx, &d, &grad, &xi, l1(bx));
    Ok(clip_step(numerator, ad.norm_sq()))
}

/// `(ξ⁻ − ∇f)ᵀd − μ(‖𝔹xᵗ‖₁ − ‖xᵗ‖₁)`; the negated S4 quantity.
fn step_numerator(p: &CappedL1Problem, x: &[f64], _bx: &[f64], d: &[f64], grad: &[f64], xi: &[f64], l1_bx: f64) -> f64 {
    let mut s = 0.0;
    for k in 0..d.len() {
        s += (xi[k] - grad[k]) * d[k];
    }
    s - p.mu() * (l1_bx - l1(x))
}

fn clip_step(numerator: f64, denominator: f64) -> Stepsize {
    if denominator == 0.0 {
        return Stepsize { gamma: 1.0, degenerate: true };
    }
    Stepsize { gamma: (numerator / denominator).clamp(0.0, 1.0), degenerate: false }
}

fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

fn check_len(p: &CappedL1Problem, x: &[f64]) -> Result<()> {
    if x.len() != p.cols() {
        return Err(Error::InvalidArgument(format!("expected length {}, got {}", p.cols(), x.len())));
    }
    Ok(())
}

/// How the linear term of the approximate problem is formed.
#[derive(Clone, Copy)]
pub(crate) enum XiSource<'a> {
    /// `ξ⁻(xᵗ)` re-evaluated at every iterate.
    Current,
    /// A frozen linearization point, as in the classic MM inner loop.
    Fixed(&'a [f64]),
}

/// Iterate state carried between STELA steps: `x`, and `r = Ax − b`.
pub(crate) struct StelaState {
    pub x: DenseVector,
    pub residual: DenseVector,
}

impl StelaState {
    pub fn new(p: &CappedL1Problem, x0: &DenseVector) -> Self {
        Self { x: x0.clone(), residual: p.residual(x0) }
    }

    pub fn refresh(&mut self, p: &CappedL1Problem) {
        self.residual = p.residual(&self.x);
    }
}

/// One evaluation of direction, gap and (if not stopping) the update.
pub(crate) struct StelaStep {
    pub gap: f64,
    pub gamma: f64,
}

pub(crate) fn stela_step(
    p: &CappedL1Problem,
    state: &mut StelaState,
    xi_source: XiSource<'_>,
    delta: f64,
    last: bool,
) -> Result<StelaStep> {
    let grad = p.a().matvec_t(&state.residual)?;
    let xi = match xi_source {
        XiSource::Current => xi_minus(p, &state.x),
        XiSource::Fixed(xi) => DenseVector::from(xi.to_vec()),
    };
    let bx = direction_from(p, &state.x, &grad, &xi);
    let l1_bx = l1(&bx);
    let d = bx.sub(&state.x);
    let numerator = step_numerator(p, &state.x, &bx, &d, &grad, &xi, l1_bx);
    let gap = numerator.abs();
    if gap <= delta || last {
        return Ok(StelaStep { gap, gamma: 0.0 });
    }
    let ad = p.a().matvec(&d)?;
    let step = clip_step(numerator, dot(&ad, &ad));
    if !(step.gamma > 0.0) {
        return Err(Error::Internal(format!("zero stepsize with gap {gap}")));
    }
    state.x = state.x.step(step.gamma, &d);
    state.residual = state.residual.step(step.gamma, &ad);
    Ok(StelaStep { gap, gamma: step.gamma })
}

/// Parallel best-response with closed-form exact line search.
pub fn run_stela(p: &CappedL1Problem, x0: &DenseVector, delta: f64, max_iter: usize) -> Result<SolveReport<DenseVector>> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("stop tolerance must be positive, got {delta}")));
    }
    check_len(p, x0)?;
    let mut watch = Stopwatch::started();
    let mut state = StelaState::new(p, x0);
    watch.pause();
    let mut h = p.h_from_residual(&state.residual, &state.x);
    watch.resume();
    let mut trace = Vec::new();
    let mut counters = Vec::new();

    for t in 0..=max_iter {
        let step = stela_step(p, &mut state, XiSource::Current, delta, t == max_iter)?;
        counters.push(IterationCounters { model_solves: 1, gplus_evals: 1 });
        if t > 0 && t % RESIDUAL_REFRESH == 0 {
            state.refresh(p);
        }
        watch.pause();
        trace.push(IterationTrace {
            iteration: t,
            h_value: h,
            stationarity_gap: step.gap,
            step_size: step.gamma,
            elapsed_seconds: watch.seconds(),
        });
        if step.gamma == 0.0 {
            return Ok(SolveReport { solution: state.x, trace, converged: step.gap <= delta, counters });
        }
        let h_next = p.h_from_residual(&state.residual, &state.x);
        if !(h_next <= h + MONOTONE_TOL * h.abs().max(1.0)) {
            return Err(Error::Internal(format!("objective increased from {h} to {h_next} at iteration {t}")));
        }
        h = h_next;
        watch.resume();
    }
    unreachable!("loop returns at t == max_iter")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{DenseMatrix, RngStream};
    use crate::oracles::{grid_min_1d, GridSpec};
    use crate::sca::{stationarity_gap, DcProblem};

    fn worked_2d() -> CappedL1Problem {
        CappedL1Problem::new(DenseMatrix::identity(2), vec![3.0, 0.2].into(), 1.0, 1.0).unwrap()
    }

    #[test]
    fn direction_examples() {
        let p = worked_2d();
        assert_eq!(&stela_direction(&p, &[0.0, 0.0]).unwrap()[..], &[2.0, 0.0]);
        assert_eq!(&stela_direction(&p, &[3.0, 0.0]).unwrap()[..], &[3.0, 0.0]);
        assert!(stationarity_gap(&p, &[3.0, 0.0], &[3.0, 0.0]).unwrap() <= 1e-12);
    }

    #[test]
    fn direction_reduces_to_lasso_without_cap() {
        let mut rng = RngStream::new(9);
        let a = rng.normal_matrix(6, 8, 1.0);
        let b = rng.normal_vector(6, 1.0);
        let capped = CappedL1Problem::new(a.clone(), b.clone(), 0.2, 1e9).unwrap();
        let lasso = CappedL1Problem::lasso(a, b, 0.2).unwrap();
        let x = rng.normal_vector(8, 1.0);
        assert_eq!(stela_direction(&capped, &x).unwrap(), stela_direction(&lasso, &x).unwrap());
    }

    #[test]
    fn stepsize_examples() {
        let p = worked_2d();
        let s = stela_stepsize(&p, &[0.0, 0.0], &[2.0, 0.0]).unwrap();
        assert_eq!(s, Stepsize { gamma: 1.0, degenerate: false });
        assert_eq!(stela_stepsize(&p, &[1.0, 0.5], &[1.0, 0.5]).unwrap().gamma, 0.0);
        // cross-check with the grid minimizer of the majorant model
        let phi = |g: f64| {
            let x = [2.0 * g, 0.0];
            p.f(&x) + g * (p.gplus(&[2.0, 0.0]) - 0.0)
        };
        let (g, _) = grid_min_1d(phi, GridSpec::unit(10_001)).unwrap();
        assert!((g - 1.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_direction_is_flagged() {
        // A = [1 1]: direction (1, −1) lies in the null space
        let p = CappedL1Problem::new(DenseMatrix::from_rows(&[&[1.0, 1.0]]), vec![0.0].into(), 0.1, 5.0).unwrap();
        let s = stela_stepsize(&p, &[1.0, 1.0], &[2.0, 0.0]).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.gamma, 1.0);
    }

    #[test]
    fn one_dimensional_run() {
        let p = CappedL1Problem::new(DenseMatrix::from_rows(&[&[1.0]]), vec![3.0].into(), 1.0, 1.0).unwrap();
        let r = run_stela(&p, &vec![0.0].into(), 1e-12, 100).unwrap();
        assert!(r.converged);
        assert!((r.solution[0] - 3.0).abs() < 1e-12);
        assert!((r.final_h() - 1.0).abs() < 1e-12);
        let again = run_stela(&p, &r.solution, 1e-6, 100).unwrap();
        assert_eq!(again.trace.len(), 1);
    }

    #[test]
    fn residual_cache_stays_accurate() {
        let mut rng = RngStream::new(10);
        let p = CappedL1Problem::new(rng.normal_matrix(30, 60, 0.2), rng.normal_vector(30, 1.0), 0.05, 1.0).unwrap();
        let mut state = StelaState::new(&p, &DenseVector::zeros(60));
        for _ in 0..250 {
            let step = stela_step(&p, &mut state, XiSource::Current, 1e-14, false).unwrap();
            if step.gamma == 0.0 {
                break;
            }
            let exact = p.residual(&state.x);
            assert!(exact.sub(&state.residual).norm() <= 1e-10 * (1.0 + p.b().norm()));
        }
    }

    #[test]
    fn matches_generic_driver() {
        let mut rng = RngStream::new(11);
        let p = CappedL1Problem::new(rng.normal_matrix(20, 40, 0.3), rng.normal_vector(20, 1.0), 0.1, 0.5).unwrap();
        let fast = run_stela(&p, &DenseVector::zeros(40), 1e-10, 2000).unwrap();
        let s = crate::capped_l1::JacobiSurrogate::new(&p);
        let generic =
            crate::sca::run_sca(&p, &s, crate::sca::LineSearchSpec::Exact, &DenseVector::zeros(40), 1e-10, 2000)
                .unwrap();
        assert!(fast.converged && generic.converged);
        assert!((fast.final_h() - generic.final_h()).abs() <= 1e-9 * fast.final_h());
    }
}
