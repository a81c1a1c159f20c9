use crate::error::{Error, Result};
use crate::numerics::DenseVector;
use crate::sca::problem::ProxGplus;
use crate::sca::trace::{IterationCounters, IterationTrace, SolveReport, Stopwatch};

/// Cap on backtracking steps per iteration.
pub const GIST_MAX_BACKTRACK: usize = 60;

/// Proximal gradient with backtracked step `βᵐ` (GIST) for `g⁻ ≡ 0`.
///
/// Each trial solves the proximal model with weight `1/βᵐ` and accepts the
/// first `m` with `h(x*(βᵐ)) < h(xᵗ) − (α/2βᵐ)‖x*(βᵐ) − xᵗ‖²`. The `gap` column
/// records the gradient-mapping norm `‖x*(βᵐ) − xᵗ‖/βᵐ`; the run stops once it
/// is at most `tol`.
pub fn gist_baseline<P: ProxGplus>(
    p: &P,
    x0: &DenseVector,
    beta: f64,
    alpha: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SolveReport<DenseVector>> {
    if !p.gminus_is_zero() {
        return Err(Error::InvalidProblem("GIST baseline requires a convex regularizer (g⁻ ≡ 0)".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha, beta must lie in (0,1), got {alpha}, {beta}")));
    }
    if x0.len() != p.dimension() {
        return Err(Error::InvalidArgument("start point dimension mismatch".into()));
    }

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
        for _ in 0..=GIST_MAX_BACKTRACK {
            let v: Vec<f64> = x.iter().zip(grad.iter()).map(|(x, g)| x - step * g).collect();
            let cand = p.prox_gplus(&v, step);
            solves += 1;
            let dist_sq = cand.sub(&x).norm_sq();
            mapping = dist_sq.sqrt() / step;
            if dist_sq == 0.0 {
                accepted = Some((cand, h_x, step));
                break;
            }
            let h_c = p.h(&cand);
            if h_c < h_x - alpha / (2.0 * step) * dist_sq {
                accepted = Some((cand, h_c, step));
                break;
            }
            step *= beta;
        }
        counters.push(IterationCounters { model_solves: solves, gplus_evals: solves });
        let Some((cand, h_c, step)) = accepted else {
            return Err(Error::LineSearchFailure { attempts: GIST_MAX_BACKTRACK + 1 });
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capped_l1::{self, CappedL1Problem};
    use crate::numerics::{spectral_norm, DenseMatrix, RngStream};

    #[test]
    fn no_backtracking_below_lipschitz() {
        let mut rng = RngStream::new(2);
        let mut a = rng.normal_matrix(10, 6, 1.0);
        let l = spectral_norm(&a).unwrap().powi(2);
        a = a.scale(0.9 / l.sqrt());
        let p = CappedL1Problem::lasso(a, rng.normal_vector(10, 1.0), 0.05).unwrap();
        let r = gist_baseline(&p, &DenseVector::zeros(6), 0.5, 0.5, 200, 1e-10).unwrap();
        assert!(r.counters.iter().all(|c| c.model_solves == 1));
    }

    #[test]
    fn agrees_with_stela_on_lasso() {
        let mut rng = RngStream::new(6);
        let a = rng.normal_matrix(30, 50, 1.0 / 30f64.sqrt());
        let b = rng.normal_vector(30, 1.0);
        let mu = 0.1 * a.matvec_t(&b).unwrap().max_abs();
        let p = CappedL1Problem::lasso(a.clone(), b.clone(), mu).unwrap();
        let gist = gist_baseline(&p, &DenseVector::zeros(50), 0.5, 1e-4, 20_000, 1e-10).unwrap();
        assert!(gist.converged);
        assert!(gist.counters.iter().all(|c| c.model_solves >= 1));
        let stela = capped_l1::run_stela(&p, &DenseVector::zeros(50), 1e-12, 20_000).unwrap();
        assert!(stela.counters.iter().all(|c| c.model_solves == 1));
        let rel = (gist.final_h() - stela.final_h()).abs() / stela.final_h();
        assert!(rel <= 1e-6, "{} vs {}", gist.final_h(), stela.final_h());
    }

    #[test]
    fn rejects_nonconvex_regularizer() {
        let p = CappedL1Problem::new(DenseMatrix::identity(2), vec![1.0, 1.0].into(), 1.0, 1.0).unwrap();
        assert!(matches!(
            gist_baseline(&p, &DenseVector::zeros(2), 0.5, 0.5, 10, 1e-8),
            Err(Error::InvalidProblem(_))
        ));
    }
}
