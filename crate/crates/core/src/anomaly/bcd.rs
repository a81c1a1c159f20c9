use crate::anomaly::kernels::{best_p, best_q, factor_qqt};
use crate::anomaly::problem::{AnomalyProblem, AnomalyState};
use crate::error::{Error, Result};
use crate::numerics::{shrink, DenseMatrix};
use crate::sca::trace::{IterationCounters, IterationTrace, SolveReport, Stopwatch};

/// Block coordinate descent: per sweep, `P` by its ridge solve, then `Q`,
/// then the rows of `S` one after another, each by exact soft-thresholding.
///
/// A trace row is recorded after the `P` update, the `Q` update and every row
/// update; its `gap` column holds the decrease of `h` achieved by that update.
/// The run stops after `sweeps` sweeps, or earlier once a whole sweep
/// decreases `h` by at most `tol·max(1, |h|)`.
pub fn run_bcd(p: &AnomalyProblem, z0: &AnomalyState, sweeps: usize, tol: f64) -> Result<SolveReport<AnomalyState>> {
    p.check_state(z0)?;
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("sweep tolerance must be nonnegative, got {tol}")));
    }
    let (n, k, _) = p.dims();
    let (lambda, mu) = (p.lambda(), p.mu());
    let diag = p.diag_dtd();
    let support = column_support(p.d());

    let mut watch = Stopwatch::started();
    let mut z = z0.clone();
    let mut r = p.residual(&z)?;
    watch.pause();
    let mut h = h_from(p, &z, &r);
    let mut trace = vec![IterationTrace {
        iteration: 0,
        h_value: h,
        stationarity_gap: f64::INFINITY,
        step_size: 0.0,
        elapsed_seconds: watch.seconds(),
    }];
    watch.resume();
    let mut counters = vec![IterationCounters::default()];
    let mut converged = false;

    let record = |watch: &Stopwatch, trace: &mut Vec<IterationTrace>, h: &mut f64, h_new: f64| {
        trace.push(IterationTrace {
            iteration: trace.len(),
            h_value: h_new,
            stationarity_gap: *h - h_new,
            step_size: 1.0,
            elapsed_seconds: watch.seconds(),
        });
        *h = h_new;
    };

    for _ in 0..sweeps {
        let h_sweep = h;

        let w = p.y().sub(&p.d().matmul(&z.s)?)?;
        z.p = best_p(&w, &z.q, &factor_qqt(&z.q, lambda)?)?;
        watch.pause();
        let h_new = h_from(p, &z, &z.p.matmul(&z.q)?.sub(&w)?);
        record(&watch, &mut trace, &mut h, h_new);
        counters.push(IterationCounters { model_solves: 1, gplus_evals: 0 });
        watch.resume();

        z.q = best_q(&z.p.matmul_tn(&z.p)?, &z.p.matmul_tn(&w)?, lambda)?;
        r = z.p.matmul(&z.q)?.sub(&w)?;
        watch.pause();
        let h_new = h_from(p, &z, &r);
        record(&watch, &mut trace, &mut h, h_new);
        counters.push(IterationCounters { model_solves: 1, gplus_evals: 0 });
        watch.resume();

        let mut corr = vec![0.0; k];
        for (i, rows) in support.iter().enumerate() {
            corr.iter_mut().for_each(|c| *c = 0.0);
            for &(row, weight) in rows {
                for (c, &v) in corr.iter_mut().zip(r.row(row)) {
                    *c += weight * v;
                }
            }
            let mut change = vec![0.0; k];
            for j in 0..k {
                let old = z.s.get(i, j);
                let new = shrink(diag[i] * old - corr[j], mu) / diag[i];
                z.s.set(i, j, new);
                change[j] = new - old;
            }
            for &(row, weight) in rows {
                let dst = r.row_mut(row);
                for (v, &c) in dst.iter_mut().zip(&change) {
                    *v += weight * c;
                }
            }
            watch.pause();
            let h_new = h_from(p, &z, &r);
            record(&watch, &mut trace, &mut h, h_new);
            counters.push(IterationCounters { model_solves: 1, gplus_evals: 1 });
            watch.resume();
        }
        debug_assert_eq!(r.rows(), n);
        if h_sweep - h <= tol * h.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    if let Some(last) = trace.last_mut() {
        last.step_size = 0.0;
    }
    Ok(SolveReport { solution: z, trace, converged, counters })
}

/// Nonzero entries `(n, D[n, i])` of each column `i`.
fn column_support(d: &DenseMatrix) -> Vec<Vec<(usize, f64)>> {
    let mut out = vec![Vec::new(); d.cols()];
    for n in 0..d.rows() {
        for (i, &v) in d.row(n).iter().enumerate() {
            if v != 0.0 {
                out[i].push((n, v));
            }
        }
    }
    out
}

fn h_from(p: &AnomalyProblem, z: &AnomalyState, r: &DenseMatrix) -> f64 {
    0.5 * r.frobenius_sq() + 0.5 * p.lambda() * (z.p.frobenius_sq() + z.q.frobenius_sq()) + p.mu() * z.s.l1_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anomaly::{generate_data, objective, run_stela};
    use crate::numerics::RngStream;

    #[test]
    fn identity_routing_row_update_is_soft_threshold() {
        let mut rng = RngStream::new(4);
        let y = rng.normal_matrix(3, 4, 2.0);
        let p = AnomalyProblem::new(y.clone(), DenseMatrix::identity(3), 0.5, 0.7, 1).unwrap();
        let z0 = p.default_start(1);
        let r = run_bcd(&p, &z0, 1, 0.0).unwrap();
        let z = &r.solution;
        let low = z.p.matmul(&z.q).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                let want = shrink(y.get(i, j) - low.get(i, j), 0.7);
                assert!((z.s.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn updates_never_increase_h() {
        let (p, _) = generate_data(12, 15, 10, 2, 2).unwrap();
        let r = run_bcd(&p, &p.default_start(3), 20, 0.0).unwrap();
        assert_eq!(r.trace.len(), 1 + 20 * 12);
        for w in r.trace.windows(2) {
            assert!(w[1].h_value <= w[0].h_value + 1e-10 * w[0].h_value.abs().max(1.0));
        }
        let direct = objective(&p, &r.solution).unwrap();
        assert!((direct - r.final_h()).abs() <= 1e-10 * direct);
    }

    #[test]
    fn reaches_stela_objective() {
        let (p, _) = generate_data(15, 20, 12, 2, 5).unwrap();
        let z0 = p.default_start(5);
        let bcd = run_bcd(&p, &z0, 20_000, 1e-15).unwrap();
        let stela = run_stela(&p, &z0, 1e-9, 100_000).unwrap();
        let rel = (bcd.final_h() - stela.final_h()).abs() / stela.final_h();
        assert!(rel <= 1e-3, "{} vs {}", bcd.final_h(), stela.final_h());
    }
}
