use crate::error::{Error, Result};
use crate::numerics::DenseVector;
use crate::sca::line_search::{exact_along, successive_with, LineSearchSpec, StepContext};
use crate::sca::problem::{DcProblem, DESCENT_EPS};
use crate::sca::surrogate::Surrogate;
use crate::sca::trace::{IterationCounters, IterationTrace, SolveReport, Stopwatch};

pub const DEFAULT_DELTA: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 1000;

/// Allowed increase of `h` between iterates, relative to `max(1, |h|)`.
pub const MONOTONE_TOL: f64 = 1e-10;

/// Successive convex approximation: best response, stepsize, convex-combination
/// update, until the stationarity gap drops to `delta` or `max_iter` updates.
///
/// The trace holds one record per visited iterate, so a run with `k` updates
/// has `k + 1` rows; the last row carries `γ = 0`.
pub fn run_sca<P, S>(
    p: &P,
    s: &S,
    ls: LineSearchSpec,
    x0: &DenseVector,
    delta: f64,
    max_iter: usize,
) -> Result<SolveReport<DenseVector>>
where
    P: DcProblem,
    S: Surrogate + ?Sized,
{
    ls.validate()?;
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("stop tolerance must be positive, got {delta}")));
    }
    if x0.len() != p.dimension() {
        return Err(Error::InvalidArgument(format!(
            "start point has dimension {}, problem has {}",
            x0.len(),
            p.dimension()
        )));
    }

    let mut watch = Stopwatch::started();
    let mut x = x0.clone();
    watch.pause();
    let mut h_x = p.h(&x);
    watch.resume();
    let mut trace = Vec::new();
    let mut counters = Vec::new();

    for t in 0..=max_iter {
        let xi = p.xi_minus(&x);
        let bx = s.solve(&x, &xi)?;
        let ctx = StepContext::with_xi(p, &x, &bx, xi);
        let signed = ctx.signed_gap();
        let gap = signed.abs();
        counters.push(IterationCounters { model_solves: 1, gplus_evals: 1 });

        if gap <= delta || t == max_iter {
            watch.pause();
            trace.push(record(t, h_x, gap, 0.0, &watch));
            return Ok(SolveReport { solution: x, trace, converged: gap <= delta, counters });
        }
        if !(signed < -DESCENT_EPS) {
            return Err(Error::Internal(format!(
                "{} best response is not a descent direction (slope {signed}) at iteration {t}",
                s.description()
            )));
        }

        let gamma = match ls {
            LineSearchSpec::Exact => exact_along(p, &x, &ctx.dir, ctx.delta_gplus())?,
            LineSearchSpec::Successive { alpha, beta, m_max } => successive_with(p, &x, &ctx, alpha, beta, m_max)?,
            LineSearchSpec::Constant { gamma } => gamma,
        };
        if !(gamma > 0.0) {
            return Err(Error::Internal(format!("zero stepsize along a descent direction at iteration {t}")));
        }
        let next = x.step(gamma, &ctx.dir);

        watch.pause();
        trace.push(record(t, h_x, gap, gamma, &watch));
        let h_next = p.h(&next);
        if !(h_next <= h_x + MONOTONE_TOL * h_x.abs().max(1.0)) {
            return Err(Error::Internal(format!(
                "objective increased from {h_x} to {h_next} at iteration {t}"
            )));
        }
        watch.resume();

        x = next;
        h_x = h_next;
    }
    unreachable!("loop returns at t == max_iter")
}

fn record(t: usize, h: f64, gap: f64, gamma: f64, watch: &Stopwatch) -> IterationTrace {
    IterationTrace { iteration: t, h_value: h, stationarity_gap: gap, step_size: gamma, elapsed_seconds: watch.seconds() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capped_l1::{CappedL1Problem, JacobiSurrogate};
    use crate::numerics::{DenseMatrix, RngStream};
    use crate::oracles::{grid_min_1d, GridSpec};
    use crate::sca::surrogate::proximal_surrogate;
    use crate::sca::trace::is_monotone;

    fn capped_1d() -> CappedL1Problem {
        CappedL1Problem::new(DenseMatrix::from_rows(&[&[1.0]]), vec![3.0].into(), 1.0, 1.0).unwrap()
    }

    #[test]
    fn one_dimensional_capped_converges_to_grid_minimum() {
        let p = capped_1d();
        let (x_grid, h_grid) = grid_min_1d(|x| p.h(&[x]), GridSpec::new(-5.0, 5.0, 100_001).unwrap()).unwrap();
        assert!((x_grid - 3.0).abs() < 1e-4 && (h_grid - 1.0).abs() < 1e-8);

        let s = JacobiSurrogate::new(&p);
        for ls in [LineSearchSpec::Exact, LineSearchSpec::successive(0.5, 0.5)] {
            let r = run_sca(&p, &s, ls, &vec![0.0].into(), 1e-10, 100).unwrap();
            assert!(r.converged);
            assert!((r.solution[0] - 3.0).abs() < 1e-8, "{:?}", r.solution);
            assert!((r.final_h() - 1.0).abs() < 1e-12);
            assert!(is_monotone(&r.trace, MONOTONE_TOL));
        }
    }

    #[test]
    fn stationary_start_stops_immediately() {
        let p = capped_1d();
        let s = JacobiSurrogate::new(&p);
        let r = run_sca(&p, &s, LineSearchSpec::Exact, &vec![3.0].into(), 1e-6, 100).unwrap();
        assert!(r.converged);
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.trace[0].iteration, 0);
        assert!(r.trace[0].stationarity_gap <= 1e-6);
    }

    #[test]
    fn convex_regularizer_keeps_xi_zero() {
        let mut rng = RngStream::new(4);
        let p = CappedL1Problem::lasso(rng.normal_matrix(8, 5, 1.0), rng.normal_vector(8, 1.0), 0.2).unwrap();
        let s = proximal_surrogate(&p, 20.0).unwrap();
        let r = run_sca(&p, &s, LineSearchSpec::Exact, &DenseVector::zeros(5), 1e-9, 5000).unwrap();
        assert!(r.converged);
        assert_eq!(p.xi_minus(&r.solution).max_abs(), 0.0);
    }

    #[test]
    fn constant_unit_step_with_majorizing_surrogate() {
        let mut rng = RngStream::new(8);
        let a = rng.normal_matrix(6, 4, 1.0);
        let lipschitz = crate::numerics::spectral_norm(&a).unwrap().powi(2);
        let p = CappedL1Problem::new(a, rng.normal_vector(6, 1.0), 0.1, 0.5).unwrap();
        let s = proximal_surrogate(&p, 1.01 * lipschitz).unwrap();
        let r = run_sca(&p, &s, LineSearchSpec::Constant { gamma: 1.0 }, &DenseVector::zeros(4), 1e-9, 10_000)
            .unwrap();
        assert!(r.converged);
        assert!(is_monotone(&r.trace, MONOTONE_TOL));
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = capped_1d();
        let s = JacobiSurrogate::new(&p);
        assert!(run_sca(&p, &s, LineSearchSpec::Exact, &vec![0.0].into(), 0.0, 10).is_err());
        assert!(run_sca(&p, &s, LineSearchSpec::Exact, &vec![0.0, 1.0].into(), 1e-6, 10).is_err());
        assert!(run_sca(&p, &s, LineSearchSpec::Constant { gamma: 2.0 }, &vec![0.0].into(), 1e-6, 10).is_err());
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let mut rng = RngStream::new(12);
        let p = CappedL1Problem::new(rng.normal_matrix(10, 20, 1.0), rng.normal_vector(10, 1.0), 0.05, 1.0).unwrap();
        let s = JacobiSurrogate::new(&p);
        let r = run_sca(&p, &s, LineSearchSpec::Exact, &DenseVector::zeros(20), 1e-14, 3).unwrap();
        assert!(!r.converged);
        assert_eq!(r.trace.len(), 4);
        assert_eq!(r.iterations(), 3);
    }
}
