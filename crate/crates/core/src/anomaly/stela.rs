use serde::{Deserialize, Serialize};

use crate::anomaly::kernels::{
    add_objective, best_p, best_q, best_s, factor_qqt, local_coeffs, local_partials, objective_seed, residual, Block,
    CoeffShared, LocalCoeffs, LocalPartials, RowSums, RESIDUAL_REFRESH,
};
use crate::anomaly::problem::{AnomalyProblem, AnomalyState};
use crate::error::{Error, Result};
use crate::numerics::{quartic_min_unit, quartic_value, DenseMatrix, DenseVector};
use crate::sca::trace::{IterationCounters, IterationTrace, SolveReport, Stopwatch};
use crate::sca::{DcProblem, Surrogate, DESCENT_EPS, MONOTONE_TOL};

/// Coefficients of `φ′(γ) = aγ³ + bγ² + cγ + d`, the derivative of the
/// majorant `f(Zᵗ + γΔZ) + γμ(‖𝔹_S‖₁ − ‖Sᵗ‖₁) − f(Zᵗ)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuarticCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl QuarticCoeffs {
    pub fn from_array([a, b, c, d]: [f64; 4]) -> Self {
        Self { a, b, c, d }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// `φ(γ) = ¼aγ⁴ + ⅓bγ³ + ½cγ² + dγ`.
    pub fn phi(&self, gamma: f64) -> f64 {
        quartic_value(self.a, self.b, self.c, self.d, gamma)
    }

    pub fn dphi(&self, gamma: f64) -> f64 {
        ((self.a * gamma + self.b) * gamma + self.c) * gamma + self.d
    }
}

pub(crate) fn block_for<'a>(p: &'a AnomalyProblem, z: &'a AnomalyState) -> Block<'a> {
    Block { y: p.y(), d: p.d(), p: &z.p }
}

pub(crate) fn best_response_from(p: &AnomalyProblem, z: &AnomalyState, lp: &LocalPartials) -> Result<AnomalyState> {
    let (_, k, i) = p.dims();
    let mut sums = RowSums::zeros(p.rho(), k, i);
    sums.add(block_for(p, z), lp)?;
    let qqt = factor_qqt(&z.q, p.lambda())?;
    Ok(AnomalyState {
        p: best_p(&lp.w, &z.q, &qqt)?,
        q: best_q(&sums.gram_p, &sums.ptw, p.lambda())?,
        s: best_s(&z.s, p.diag_dtd(), &sums.dtr, p.mu()),
    })
}

/// Jacobi best response `(𝔹_P, 𝔹_Q, 𝔹_S)`, all three blocks computed from `Zᵗ`.
pub fn best_response(p: &AnomalyProblem, z_t: &AnomalyState) -> Result<AnomalyState> {
    p.check_state(z_t)?;
    let b = block_for(p, z_t);
    let lp = local_partials(b, &z_t.q, residual(b, &z_t.q, &z_t.s)?)?;
    best_response_from(p, z_t, &lp)
}

pub(crate) fn coeffs_from(
    p: &AnomalyProblem,
    z: &AnomalyState,
    bz: &AnomalyState,
    r: &DenseMatrix,
) -> Result<(QuarticCoeffs, AnomalyState, LocalCoeffs)> {
    let delta = bz.sub(z)?;
    let shared = CoeffShared {
        q: &z.q,
        dq: &delta.q,
        ds: &delta.s,
        lambda: p.lambda(),
        mu_delta_l1: p.mu() * (bz.s.l1_norm() - z.s.l1_norm()),
    };
    let mut acc = shared.seed()?;
    let lc = local_coeffs(block_for(p, z), r, &delta.p, &shared, &mut acc)?;
    Ok((QuarticCoeffs::from_array(acc), delta, lc))
}

/// Quartic line-search coefficients along `𝔹Zᵗ − Zᵗ`.
pub fn quartic_coeffs(p: &AnomalyProblem, z_t: &AnomalyState, bz: &AnomalyState) -> Result<QuarticCoeffs> {
    p.check_state(z_t)?;
    p.check_state(bz)?;
    let r = p.residual(z_t)?;
    Ok(coeffs_from(p, z_t, bz, &r)?.0)
}

/// Global minimizer of `φ` over `[0, 1]`.
pub fn exact_line_search_quartic(q: QuarticCoeffs) -> f64 {
    quartic_min_unit(q.a, q.b, q.c, q.d)
}

pub(crate) fn objective_from(p: &AnomalyProblem, z: &AnomalyState, r: &DenseMatrix) -> f64 {
    let mut h = objective_seed(&z.q, &z.s, p.lambda(), p.mu());
    add_objective(&mut h, r, &z.p, p.lambda());
    h
}

/// Parallel best-response with the quartic exact line search.
///
/// The stationarity gap is `|tr(ΔZᵀ∇f(Zᵗ)) + μ(‖𝔹_S‖₁ − ‖Sᵗ‖₁)|`, which is the
/// constant coefficient `|d|` of `φ′`.
pub fn run_stela(
    p: &AnomalyProblem,
    z0: &AnomalyState,
    delta: f64,
    max_iter: usize,
) -> Result<SolveReport<AnomalyState>> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("stop tolerance must be positive, got {delta}")));
    }
    p.check_state(z0)?;
    let mut watch = Stopwatch::started();
    let mut z = z0.clone();
    let b = block_for(p, &z);
    let mut lp = local_partials(b, &z.q, residual(b, &z.q, &z.s)?)?;
    watch.pause();
    let mut h = objective_from(p, &z, &lp.r);
    watch.resume();
    let mut trace = Vec::new();
    let mut counters = Vec::new();

    for t in 0..=max_iter {
        let bz = best_response_from(p, &z, &lp)?;
        let (coeffs, dir, lc) = coeffs_from(p, &z, &bz, &lp.r)?;
        counters.push(IterationCounters { model_solves: 1, gplus_evals: 1 });
        let gap = coeffs.d.abs();
        if gap <= delta || t == max_iter {
            watch.pause();
            trace.push(IterationTrace { iteration: t, h_value: h, stationarity_gap: gap, step_size: 0.0, elapsed_seconds: watch.seconds() });
            return Ok(SolveReport { solution: z, trace, converged: gap <= delta, counters });
        }
        if !(coeffs.d < -DESCENT_EPS) {
            return Err(Error::Internal(format!("best response is not a descent direction (slope {}) at iteration {t}", coeffs.d)));
        }
        let gamma = exact_line_search_quartic(coeffs);
        if !(gamma > 0.0) {
            return Err(Error::Internal(format!("zero stepsize along a descent direction at iteration {t}")));
        }
        z = z.step(gamma, &dir)?;
        let b = block_for(p, &z);
        let mut r = lp.r;
        if (t + 1) % RESIDUAL_REFRESH == 0 {
            r = residual(b, &z.q, &z.s)?;
        } else {
            lc.advance(&mut r, gamma)?;
        }
        lp = local_partials(b, &z.q, r)?;
        watch.pause();
        trace.push(IterationTrace { iteration: t, h_value: h, stationarity_gap: gap, step_size: gamma, elapsed_seconds: watch.seconds() });
        let h_next = objective_from(p, &z, &lp.r);
        if !(h_next <= h + MONOTONE_TOL * h.abs().max(1.0)) {
            return Err(Error::Internal(format!("objective increased from {h} to {h_next} at iteration {t}")));
        }
        h = h_next;
        watch.resume();
    }
    unreachable!("loop returns at t == max_iter")
}

/// `(h(Zᵗ) − h*)/h*` per trace row.
pub fn relative_error(trace: &[IterationTrace], h_star: f64) -> Result<Vec<f64>> {
    if !(h_star > 0.0) || !h_star.is_finite() {
        return Err(Error::InvalidReference(h_star));
    }
    Ok(trace.iter().map(|r| (r.h_value - h_star) / h_star).collect())
}

/// The problem on the flattened variable `vec(P) ++ vec(Q) ++ vec(S)`, with
/// `g⁺ = μ‖S‖₁` and `g⁻ ≡ 0`.
impl DcProblem for AnomalyProblem {
    fn dimension(&self) -> usize {
        let (n, k, i) = self.dims();
        (n + k) * self.rho() + i * k
    }

    fn f(&self, x: &[f64]) -> f64 {
        AnomalyProblem::f(self, &unflat(self, x)).expect("conforming state")
    }

    fn grad_f(&self, x: &[f64]) -> DenseVector {
        AnomalyProblem::grad_f(self, &unflat(self, x)).expect("conforming state").flatten()
    }

    fn gplus(&self, x: &[f64]) -> f64 {
        self.mu() * x[self.s_offset()..].iter().map(|v| v.abs()).sum::<f64>()
    }

    fn gplus_subgrad(&self, x: &[f64]) -> DenseVector {
        let off = self.s_offset();
        DenseVector::from_fn(x.len(), |j| if j < off { 0.0 } else { self.mu() * signum0(x[j]) })
    }

    fn gminus(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn xi_minus(&self, x: &[f64]) -> DenseVector {
        DenseVector::zeros(x.len())
    }

    fn gminus_is_zero(&self) -> bool {
        true
    }
}

impl AnomalyProblem {
    fn s_offset(&self) -> usize {
        let (n, k, _) = self.dims();
        (n + k) * self.rho()
    }
}

fn unflat(p: &AnomalyProblem, x: &[f64]) -> AnomalyState {
    AnomalyState::unflatten(p, x).expect("flat state of problem dimension")
}

fn signum0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Blockwise best-response surrogate on the flattened variable.
///
/// `f̃(Z; Zᵗ) = f(P, Qᵗ, Sᵗ) + f(Pᵗ, Q, Sᵗ) + Σᵢₖ f(sᵢₖ, Sᵗ₋ᵢₖ)`, each term
/// being `f` restricted to one block (or one entry of `S`) around `Zᵗ`.
pub struct AnomalySurrogate<'a> {
    problem: &'a AnomalyProblem,
}

impl<'a> AnomalySurrogate<'a> {
    pub fn new(problem: &'a AnomalyProblem) -> Self {
        Self { problem }
    }
}

impl Surrogate for AnomalySurrogate<'_> {
    fn solve(&self, x_t: &DenseVector, _xi_minus: &DenseVector) -> Result<DenseVector> {
        Ok(best_response(self.problem, &AnomalyState::unflatten(self.problem, x_t)?)?.flatten())
    }

    fn description(&self) -> &str {
        "anomaly best-response"
    }

    fn approx_f(&self, x: &[f64], x_t: &[f64]) -> Option<f64> {
        let p = self.problem;
        let z = AnomalyState::unflatten(p, x).ok()?;
        let zt = AnomalyState::unflatten(p, x_t).ok()?;
        let fp = p.f(&AnomalyState { p: z.p.clone(), q: zt.q.clone(), s: zt.s.clone() }).ok()?;
        let fq = p.f(&AnomalyState { p: zt.p.clone(), q: z.q.clone(), s: zt.s.clone() }).ok()?;
        let f0 = p.f(&zt).ok()?;
        let gs = p.grad_f(&zt).ok()?.s;
        let diag = p.diag_dtd();
        let mut fs = 0.0;
        for i in 0..z.s.rows() {
            for k in 0..z.s.cols() {
                let dlt = z.s.get(i, k) - zt.s.get(i, k);
                fs += f0 + gs.get(i, k) * dlt + 0.5 * diag[i] * dlt * dlt;
            }
        }
        Some(fp + fq + fs)
    }
}
