use crate::capped_l1::problem::{xi_minus, CappedL1Problem};
use crate::capped_l1::stela::{stela_step, StelaState, XiSource};
use crate::error::{Error, Result};
use crate::numerics::{shrink, DenseVector};
use crate::sca::trace::{IterationCounters, IterationTrace, SolveReport, Stopwatch};
use crate::sca::DcProblem;

pub const CLASSIC_MM_OUTER_ITERS: usize = 10;
pub const CLASSIC_MM_INNER_DELTA: f64 = 1e-8;
/// Safety cap on inner ℓ1-STELA iterations per outer step.
pub const CLASSIC_MM_INNER_MAX: usize = 100_000;
pub const PROXIMAL_MM_MAX_BACKTRACK: usize = 60;

/// Classic MM with warm start: each outer step minimizes the convex upper bound
/// `½‖Ax − b‖² − xᵀξ⁻(xᵗ) + μ‖x‖₁` with the inner ℓ1-STELA solver.
///
/// The trace has one row per inner iterate (the true `h` is recorded), so time
/// spent in inner solves is visible. The `gap` column holds the inner gap.
pub fn run_classic_mm(
    p: &CappedL1Problem,
    x0: &DenseVector,
    outer_iters: usize,
    inner_delta: f64,
) -> Result<SolveReport<DenseVector>> {
    if !(inner_delta > 0.0) {
        return Err(Error::InvalidParameter(format!("inner tolerance must be positive, got {inner_delta}")));
    }
    if x0.len() != p.cols() {
        return Err(Error::InvalidArgument(format!("expected length {}, got {}", p.cols(), x0.len())));
    }
    let mut watch = Stopwatch::started();
    let mut state = StelaState::new(p, x0);
    let mut trace = Vec::new();
    let mut counters = Vec::new();
    let mut row = 0;
    let mut outer_h = p.h_from_residual(&state.residual, &state.x);
    let mut converged = false;

    for _ in 0..outer_iters {
        let xi = xi_minus(p, &state.x);
        let start = state.x.clone();
        let mut inner_done = false;
        for inner in 0..CLASSIC_MM_INNER_MAX {
            let step = stela_step(p, &mut state, XiSource::Fixed(&xi), inner_delta, false)?;
            counters.push(IterationCounters { model_solves: 1, gplus_evals: 1 });
            if inner > 0 && inner % 100 == 0 {
                state.refresh(p);
            }
            watch.pause();
            trace.push(IterationTrace {
                iteration: row,
                h_value: p.h_from_residual(&state.residual, &state.x),
                stationarity_gap: step.gap,
                step_size: step.gamma,
                elapsed_seconds: watch.seconds(),
            });
            watch.resume();
            row += 1;
            if step.gamma == 0.0 {
                inner_done = true;
                break;
            }
        }
        if !inner_done {
            return Err(Error::ConvergenceFailure { iterations: CLASSIC_MM_INNER_MAX, estimate: outer_h });
        }
        state.refresh(p);
        let h = p.h_from_residual(&state.residual, &state.x);
        if !(h <= outer_h + crate::sca::MONOTONE_TOL * outer_h.abs().max(1.0)) {
            return Err(Error::Internal(format!("outer objective increased from {outer_h} to {h}")));
        }
        outer_h = h;
        if state.x == start {
            converged = true;
            break;
        }
    }
    if let Some(last) = trace.last_mut() {
        last.h_value = outer_h;
        last.step_size = 0.0;
    }
    Ok(SolveReport { solution: state.x, trace, converged, counters })
}

/// Scalar proximal model `min_x (w/2)(x − u)² + μ·min(|x|, θ)` in closed form.
///
/// Inside the cap the minimizer is the soft-threshold point clipped to `[−θ, θ]`;
/// outside it is `u` pushed out to `|x| ≥ θ`. Ties go to the inner candidate.
pub fn capped_prox(u: f64, w: f64, mu: f64, theta: f64) -> f64 {
    let inner = shrink(u, mu / w).clamp(-theta, theta);
    if theta.is_infinite() {
        return inner;
    }
    let outer = if u.abs() >= theta {
        u
    } else if u < 0.0 {
        -theta
    } else {
        theta
    };
    let obj = |x: f64| 0.5 * w * (x - u) * (x - u) + mu * x.abs().min(theta);
    if obj(outer) < obj(inner) {
        outer
    } else {
        inner
    }
}

/// Proximal MM (GIST on the full capped objective) with backtracked weight `1/βᵐ`.
///
/// Accepts the first `m` with `h(x*(βᵐ)) − h(xᵗ) ≤ −(α/2βᵐ)‖x*(βᵐ) − xᵗ‖²`,
/// `m` restarting from 0 at every iteration. The `gap` column holds the
/// gradient-mapping norm `‖x* − xᵗ‖/βᵐ`; the run stops once it is at most `tol`.
pub fn run_proximal_mm(
    p: &CappedL1Problem,
    x0: &DenseVector,
    alpha: f64,
    beta: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SolveReport<DenseVector>> {
    if !(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha, beta must lie in (0,1), got {alpha}, {beta}")));
    }
    if x0.len() != p.cols() {
        return Err(Error::InvalidArgument(format!("expected length {}, got {}", p.cols(), x0.len())));
    }
    let (mu, theta) = (p.mu(), p.theta());
    let mut watch = Stopwatch::started();
    let mut x = x0.clone();
    let mut h_x = p.h(&x);
    let mut trace = Vec::new();
    let mut counters = Vec::new();

    for t in 0..=max_iter {
        let grad = p.grad_f(&x);
        let mut step = 1.0;
        let mut accepted = None;
        let mut solves = 0;
        let mut mapping = 0.0;
        for _ in 0..=PROXIMAL_MM_MAX_BACKTRACK {
            let w = 1.0 / step;
            let cand = DenseVector::from(
                x.iter().zip(grad.iter()).map(|(&xk, &gk)| capped_prox(xk - step * gk, w, mu, theta)).collect::<Vec<_>>(),
            );
            solves += 1;
            let dist_sq = cand.sub(&x).norm_sq();
            mapping = dist_sq.sqrt() / step;
            if dist_sq == 0.0 {
                accepted = Some((cand, h_x, step));
                break;
            }
            let h_c = p.h(&cand);
            if h_c - h_x <= -alpha / (2.0 * step) * dist_sq {
                accepted = Some((cand, h_c, step));
                break;
            }
            step *= beta;
        }
        counters.push(IterationCounters { model_solves: solves, gplus_evals: solves });
        let Some((cand, h_c, step)) = accepted else {
            return Err(Error::LineSearchFailure { attempts: PROXIMAL_MM_MAX_BACKTRACK + 1 });
        };

        watch.pause();
        let done = mapping <= tol || t == max_iter;
        trace.push(IterationTrace {
            iteration: t,
            h_value: h_x,
            stationarity_gap: mapping,
            step_size: if done { 0.0 } else { step },
            elapsed_seconds: watch.seconds(),
        });
        watch.resume();
        if done {
            return Ok(SolveReport { solution: x, trace, converged: mapping <= tol, counters });
        }
        x = cand;
        h_x = h_c;
    }
    unreachable!("loop returns at t == max_iter")
}
