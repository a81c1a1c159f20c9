use crate::anomaly::kernels::{best_p, best_q, factor_qqt, ridge};
use crate::anomaly::problem::{objective, AnomalyProblem, AnomalyState};
use crate::error::{Error, Result};
use crate::numerics::{soft_threshold_matrix, Cholesky, DenseMatrix};
use crate::sca::trace::{IterationCounters, IterationTrace, SolveReport, Stopwatch};

pub const ADMM_DEFAULT_C: f64 = 1e4;

/// ADMM iterate on the split `S = A = B`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmmState {
    pub p: DenseMatrix,
    pub q: DenseMatrix,
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub pi: DenseMatrix,
}

impl AdmmState {
    pub fn from_start(z0: &AnomalyState) -> Self {
        Self {
            p: z0.p.clone(),
            q: z0.q.clone(),
            a: z0.s.clone(),
            b: z0.s.clone(),
            pi: DenseMatrix::zeros(z0.s.rows(), z0.s.cols()),
        }
    }

    /// The reported iterate, with `S := A`.
    pub fn to_state(&self) -> AnomalyState {
        AnomalyState { p: self.p.clone(), q: self.q.clone(), s: self.a.clone() }
    }
}

/// `B ← S_{μ/c}(A + Π/c)`.
pub fn admm_b_update(a: &DenseMatrix, pi: &DenseMatrix, mu: f64, c: f64) -> Result<DenseMatrix> {
    let mut v = a.clone();
    v.axpy(1.0 / c, pi)?;
    soft_threshold_matrix(&v, mu / c)
}

/// Factor of `DᵀD + cI`, constant across iterations.
pub fn admm_a_factor(p: &AnomalyProblem, c: f64) -> Result<Cholesky> {
    Cholesky::factor(&ridge(&p.d().matmul_tn(p.d())?, c))
}

/// `A` solving `(DᵀD + cI)A = Dᵀ(Y − PQ) + cB − Π`.
pub fn admm_a_update(p: &AnomalyProblem, chol: &Cholesky, st: &AdmmState, c: f64) -> Result<DenseMatrix> {
    let target = p.y().sub(&st.p.matmul(&st.q)?)?;
    let mut rhs = p.d().matmul_tn(&target)?;
    rhs.axpy(c, &st.b)?;
    rhs.axpy(-1.0, &st.pi)?;
    chol.solve(&rhs)
}

/// One cycle: `(Q, B)` jointly, then `P`, then `A`, then `Π ← Π + c(A − B)`.
pub fn admm_cycle(p: &AnomalyProblem, chol: &Cholesky, st: &mut AdmmState, c: f64) -> Result<()> {
    let lambda = p.lambda();
    let w = p.y().sub(&p.d().matmul(&st.a)?)?;
    let q = best_q(&st.p.matmul_tn(&st.p)?, &st.p.matmul_tn(&w)?, lambda)?;
    st.b = admm_b_update(&st.a, &st.pi, p.mu(), c)?;
    st.q = q;
    st.p = best_p(&w, &st.q, &factor_qqt(&st.q, lambda)?)?;
    st.a = admm_a_update(p, chol, st, c)?;
    let mut gap = st.a.clone();
    gap.axpy(-1.0, &st.b)?;
    st.pi.axpy(c, &gap)?;
    Ok(())
}

/// ADMM baseline with penalty `c`. Non-convergence is a normal outcome.
///
/// `h` is reported at `(P, Q, A)`; the `gap` column holds the primal residual
/// `‖A − B‖`. The run is flagged converged when both the primal residual and
/// the dual residual `c‖Bᵗ⁺¹ − Bᵗ‖` fall to `tol`.
pub fn run_admm(
    p: &AnomalyProblem,
    z0: &AnomalyState,
    c: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SolveReport<AnomalyState>> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("penalty c must be positive, got {c}")));
    }
    p.check_state(z0)?;
    let mut watch = Stopwatch::started();
    let chol = admm_a_factor(p, c)?;
    let mut st = AdmmState::from_start(z0);
    let mut trace = Vec::new();
    let mut counters = Vec::new();
    let mut converged = false;

    watch.pause();
    trace.push(IterationTrace {
        iteration: 0,
        h_value: objective(p, &st.to_state())?,
        stationarity_gap: 0.0,
        step_size: 0.0,
        elapsed_seconds: watch.seconds(),
    });
    watch.resume();

    for t in 1..=max_iter {
        let b_prev = st.b.clone();
        admm_cycle(p, &chol, &mut st, c)?;
        counters.push(IterationCounters { model_solves: 1, gplus_evals: 1 });
        watch.pause();
        let primal = st.a.sub(&st.b)?.frobenius();
        let dual = c * st.b.sub(&b_prev)?.frobenius();
        let h = objective(p, &st.to_state())?;
        if !h.is_finite() {
            return Err(Error::NonFinite("ADMM objective"));
        }
        trace.push(IterationTrace {
            iteration: t,
            h_value: h,
            stationarity_gap: primal,
            step_size: 1.0,
            elapsed_seconds: watch.seconds(),
        });
        watch.resume();
        if primal <= tol && dual <= tol {
            converged = true;
            break;
        }
    }
    if let Some(last) = trace.last_mut() {
        last.step_size = 0.0;
    }
    Ok(SolveReport { solution: st.to_state(), trace, converged, counters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anomaly::generate_data;
    use crate::numerics::RngStream;
    use crate::oracles::quadratic_cd;

    #[test]
    fn b_update_example() {
        let a = DenseMatrix::from_rows(&[&[1.0]]);
        let pi = DenseMatrix::from_rows(&[&[1.2]]);
        let b = admm_b_update(&a, &pi, 1.0, 2.0).unwrap();
        assert!((b.get(0, 0) - 1.1).abs() < 1e-15);
    }

    #[test]
    fn a_update_solves_its_subproblem() {
        let (p, _) = generate_data(6, 5, 4, 2, 1).unwrap();
        let c = 3.0;
        let mut rng = RngStream::new(2);
        let z = p.default_start(1);
        let st = AdmmState {
            p: z.p,
            q: z.q,
            a: DenseMatrix::zeros(4, 5),
            b: rng.normal_matrix(4, 5, 1.0),
            pi: rng.normal_matrix(4, 5, 1.0),
        };
        let a = admm_a_update(&p, &admm_a_factor(&p, c).unwrap(), &st, c).unwrap();
        // column j of A minimizes ½‖D a − t‖² + πᵀa + (c/2)‖a − b‖²
        let h = ridge(&p.d().matmul_tn(p.d()).unwrap(), c);
        let target = p.y().sub(&st.p.matmul(&st.q).unwrap()).unwrap();
        let lin = p.d().matmul_tn(&target).unwrap();
        for j in 0..5 {
            let g: Vec<f64> = (0..4).map(|i| lin.get(i, j) + c * st.b.get(i, j) - st.pi.get(i, j)).collect();
            let col = quadratic_cd(&h, &g, 2000).unwrap();
            for i in 0..4 {
                assert!((col[i] - a.get(i, j)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn consistent_fixed_point_keeps_multiplier() {
        let (p, _) = generate_data(6, 5, 4, 2, 3).unwrap();
        let z = p.default_start(1);
        let mut st = AdmmState::from_start(&z);
        let chol = admm_a_factor(&p, 10.0).unwrap();
        for _ in 0..5000 {
            admm_cycle(&p, &chol, &mut st, 10.0).unwrap();
        }
        let before = st.pi.clone();
        admm_cycle(&p, &chol, &mut st, 10.0).unwrap();
        assert!(st.a.sub(&st.b).unwrap().max_abs() < 1e-8);
        assert!(st.pi.sub(&before).unwrap().max_abs() < 1e-6);
    }

    #[test]
    fn run_records_trace() {
        let (p, _) = generate_data(10, 12, 8, 2, 4).unwrap();
        let r = run_admm(&p, &p.default_start(2), ADMM_DEFAULT_C, 50, 1e-9).unwrap();
        assert!(r.trace.len() >= 2 && r.trace.len() <= 51);
        assert!(r.trace.iter().all(|row| row.h_value.is_finite()));
        assert!(run_admm(&p, &p.default_start(2), 0.0, 5, 1e-9).is_err());
    }
}
