//! Row-block computations shared by the centralized solver and the node
//! simulation. A block is a contiguous range of rows of `Y`, `D` and `P`; the
//! full problem is the single block covering all rows.
//!
//! Every sum over rows is a running accumulator that a block extends in row
//! order. Passing the accumulator from block to block therefore reproduces the
//! single-block result bit for bit, whatever the partition.

use crate::error::{Error, Result};
use crate::numerics::{shrink, Cholesky, DenseMatrix};

#[derive(Clone, Copy)]
pub(crate) struct Block<'a> {
    pub y: &'a DenseMatrix,
    pub d: &'a DenseMatrix,
    pub p: &'a DenseMatrix,
}

/// Block-local quantities at `Zᵗ`.
pub(crate) struct LocalPartials {
    /// `P_l Q − R_l = Y_l − D_l S`
    pub w: DenseMatrix,
    /// `P_l Q + D_l S − Y_l`
    pub r: DenseMatrix,
}

/// Running sums over rows of `PᵀP`, `PᵀW` and `DᵀR`.
#[derive(Clone, Debug)]
pub(crate) struct RowSums {
    pub gram_p: DenseMatrix,
    pub ptw: DenseMatrix,
    pub dtr: DenseMatrix,
}

impl RowSums {
    pub fn zeros(rho: usize, k: usize, i: usize) -> Self {
        Self { gram_p: DenseMatrix::zeros(rho, rho), ptw: DenseMatrix::zeros(rho, k), dtr: DenseMatrix::zeros(i, k) }
    }

    /// Extends the sums by the rows of one block.
    pub fn add(&mut self, b: Block<'_>, lp: &LocalPartials) -> Result<()> {
        self.gram_p.add_matmul_tn(b.p, b.p)?;
        self.ptw.add_matmul_tn(b.p, &lp.w)?;
        self.dtr.add_matmul_tn(b.d, &lp.r)
    }
}

/// Iterations between exact recomputations of the carried residual.
pub(crate) const RESIDUAL_REFRESH: usize = 50;

/// `P_l Q + D_l S − Y_l` from scratch.
pub(crate) fn residual(b: Block<'_>, q: &DenseMatrix, s: &DenseMatrix) -> Result<DenseMatrix> {
    let mut r = b.p.matmul(q)?;
    r.axpy(1.0, &b.d.matmul(s)?)?;
    r.axpy(-1.0, b.y)?;
    Ok(r)
}

/// Partials at `Zᵗ` given the block residual `R_l`.
pub(crate) fn local_partials(b: Block<'_>, q: &DenseMatrix, r: DenseMatrix) -> Result<LocalPartials> {
    let w = b.p.matmul(q)?.sub(&r)?;
    Ok(LocalPartials { w, r })
}

/// `M + λI` for a square `M`.
pub(crate) fn ridge(m: &DenseMatrix, lambda: f64) -> DenseMatrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        out.set(i, i, out.get(i, i) + lambda);
    }
    out
}

/// Factor of `QQᵀ + λI`, shared by every row block.
pub(crate) fn factor_qqt(q: &DenseMatrix, lambda: f64) -> Result<Cholesky> {
    spd(Cholesky::factor(&ridge(&q.matmul_nt(q)?, lambda)))
}

/// `𝔹_P` rows of one block: `W Qᵀ (QQᵀ + λI)⁻¹`.
pub(crate) fn best_p(w: &DenseMatrix, q: &DenseMatrix, qqt: &Cholesky) -> Result<DenseMatrix> {
    let qwt = q.matmul_nt(w)?;
    Ok(qqt.solve(&qwt)?.transpose())
}

/// `𝔹_Q = (PᵀP + λI)⁻¹ Pᵀ(Y − DS)` from the reduced Gram terms.
pub(crate) fn best_q(gram_p: &DenseMatrix, ptw: &DenseMatrix, lambda: f64) -> Result<DenseMatrix> {
    spd(Cholesky::factor(&ridge(gram_p, lambda)))?.solve(ptw)
}

/// `𝔹_S = d(DᵀD)⁻¹ ∘ S_μ(d(DᵀD)∘S − DᵀR)`, scaling rows.
pub(crate) fn best_s(s: &DenseMatrix, diag: &[f64], dtr: &DenseMatrix, mu: f64) -> DenseMatrix {
    let k = s.cols();
    DenseMatrix::from_fn(s.rows(), k, |i, j| shrink(diag[i] * s.get(i, j) - dtr.get(i, j), mu) / diag[i])
}

fn spd(c: Result<Cholesky>) -> Result<Cholesky> {
    c.map_err(|e| Error::Internal(format!("ridge system not positive definite: {e}")))
}

/// Inputs shared by every block when forming the quartic coefficients.
pub(crate) struct CoeffShared<'a> {
    pub q: &'a DenseMatrix,
    pub dq: &'a DenseMatrix,
    pub ds: &'a DenseMatrix,
    pub lambda: f64,
    /// `μ(‖𝔹_S‖₁ − ‖S‖₁)`
    pub mu_delta_l1: f64,
}

impl CoeffShared<'_> {
    /// Starting value of the running `(a, b, c, d)`: the terms in `Q` and `S` only.
    pub fn seed(&self) -> Result<[f64; 4]> {
        let lambda = self.lambda;
        Ok([0.0, 0.0, lambda * self.dq.frobenius_sq(), lambda * self.q.inner(self.dq)? + self.mu_delta_l1])
    }
}

/// Terms of `R_l(γ) = R_l + γE_l + γ²F_l`.
pub(crate) struct LocalCoeffs {
    pub e: DenseMatrix,
    pub f: DenseMatrix,
}

impl LocalCoeffs {
    /// Residual at `Zᵗ + γΔZ`, exact in exact arithmetic.
    pub fn advance(&self, r: &mut DenseMatrix, gamma: f64) -> Result<()> {
        r.axpy(gamma, &self.e)?;
        r.axpy(gamma * gamma, &self.f)
    }
}

/// Extends the running coefficients of `φ′(γ) = aγ³ + bγ² + cγ + d` by one block.
///
/// With `E_l = P_lΔQ + ΔP_lQ + D_lΔS` and `F_l = ΔP_lΔQ` each row adds
/// `2‖f‖²` to `a`, `3⟨f, e⟩` to `b`, `‖e‖² + 2⟨f, r⟩ + λ‖Δp‖²` to `c` and
/// `⟨e, r⟩ + λ⟨p, Δp⟩` to `d`.
pub(crate) fn local_coeffs(
    b: Block<'_>,
    r: &DenseMatrix,
    dp: &DenseMatrix,
    sh: &CoeffShared<'_>,
    acc: &mut [f64; 4],
) -> Result<LocalCoeffs> {
    let f = dp.matmul(sh.dq)?;
    let mut e = b.p.matmul(sh.dq)?;
    e.axpy(1.0, &dp.matmul(sh.q)?)?;
    e.axpy(1.0, &b.d.matmul(sh.ds)?)?;
    if r.shape() != e.shape() || dp.shape() != b.p.shape() {
        return Err(Error::InvalidArgument(format!("block shapes {:?} and {:?} do not conform", r.shape(), dp.shape())));
    }
    let lambda = sh.lambda;
    let [a, bb, c, d] = acc;
    for n in 0..e.rows() {
        for ((&ev, &fv), &rv) in e.row(n).iter().zip(f.row(n)).zip(r.row(n)) {
            *a += 2.0 * fv * fv;
            *bb += 3.0 * fv * ev;
            *c += ev * ev + 2.0 * fv * rv;
            *d += ev * rv;
        }
        for (&pv, &dv) in b.p.row(n).iter().zip(dp.row(n)) {
            *c += lambda * dv * dv;
            *d += lambda * pv * dv;
        }
    }
    Ok(LocalCoeffs { e, f })
}

/// Starting value of the running objective: `(λ/2)‖Q‖² + μ‖S‖₁`.
pub(crate) fn objective_seed(q: &DenseMatrix, s: &DenseMatrix, lambda: f64, mu: f64) -> f64 {
    0.5 * lambda * q.frobenius_sq() + mu * s.l1_norm()
}

/// Adds this block's `½‖R_l‖² + (λ/2)‖P_l‖²` to the running objective.
pub(crate) fn add_objective(acc: &mut f64, r: &DenseMatrix, p: &DenseMatrix, lambda: f64) {
    for n in 0..r.rows() {
        for &v in r.row(n) {
            *acc += 0.5 * v * v;
        }
        for &v in p.row(n) {
            *acc += 0.5 * lambda * v * v;
        }
    }
}
