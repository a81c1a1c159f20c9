//! In-process simulation of STELA for the anomaly problem over `L` nodes.
//!
//! Node `l` owns a contiguous block of rows of `Y`, `D` and `P`; `Q` and `S`
//! are replicated. Each reduction runs as a chain in node-id order: node `l`
//! receives the running sum from node `l − 1`, extends it by its own rows and
//! forwards it, and the last node's message is the result everyone uses. Per
//! iteration this exchanges the sums needed for `𝔹_Q` and `𝔹_S` and the
//! four-entry vector of line-search coefficients. Because every row sum is
//! accumulated in global row order, the outcome does not depend on `L`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anomaly::kernels::{
    add_objective, best_p, best_q, best_s, factor_qqt, local_coeffs, local_partials, objective_seed, residual,
    Block, CoeffShared, LocalCoeffs, LocalPartials, RowSums, RESIDUAL_REFRESH,
};
use crate::anomaly::{exact_line_search_quartic, AnomalyProblem, AnomalyState, QuarticCoeffs};
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::sca::trace::{IterationCounters, IterationTrace, SolveReport, Stopwatch};
use crate::sca::{DESCENT_EPS, MONOTONE_TOL};

/// Fixed per-message overhead in the byte accounting.
pub const MESSAGE_HEADER_BYTES: usize = 16;

/// Rows `row_offset .. row_offset + y.rows()` of the problem held by one node.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeShard {
    pub node_id: usize,
    pub y: DenseMatrix,
    pub d: DenseMatrix,
    pub p: DenseMatrix,
    pub row_offset: usize,
}

impl NodeShard {
    fn block(&self) -> Block<'_> {
        Block { y: &self.y, d: &self.d, p: &self.p }
    }
}

/// Balanced contiguous row partition: the first `N mod L` nodes get one extra row.
pub fn shard(p: &AnomalyProblem, z: &AnomalyState, nodes: usize) -> Result<Vec<NodeShard>> {
    p.check_state(z)?;
    let n = p.dims().0;
    if nodes == 0 || nodes > n {
        return Err(Error::InvalidPartition { rows: n, nodes });
    }
    let (base, extra) = (n / nodes, n % nodes);
    let mut offset = 0;
    let mut out = Vec::with_capacity(nodes);
    for l in 0..nodes {
        let len = base + usize::from(l < extra);
        out.push(NodeShard {
            node_id: l,
            y: p.y().row_block(offset, len)?,
            d: p.d().row_block(offset, len)?,
            p: z.p.row_block(offset, len)?,
            row_offset: offset,
        });
        offset += len;
    }
    Ok(out)
}

/// Stacks the shards back into `(Y, D, P)`.
pub fn concatenate(shards: &[NodeShard]) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix)> {
    let stack = |f: fn(&NodeShard) -> &DenseMatrix| {
        DenseMatrix::vstack(&shards.iter().map(|s| f(s).clone()).collect::<Vec<_>>())
    };
    Ok((stack(|s| &s.y)?, stack(|s| &s.d)?, stack(|s| &s.p)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    /// `P_lᵀP_l` and `P_lᵀ(Y_l − D_lS)`.
    GramPQ,
    /// Diagonal of `D_lᵀD_l`.
    GramD,
    /// `D_lᵀ(D_lS − Y_l + P_lQ)`.
    ResidualSum,
    /// `(a_l, b_l, c_l, d_l)`.
    Coeffs4,
}

/// One node's contribution to a reduction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionMessage {
    pub from: usize,
    pub kind: MessageKind,
    pub payload: Vec<f64>,
    pub byte_size: usize,
}

impl ReductionMessage {
    pub fn new(from: usize, kind: MessageKind, payload: Vec<f64>) -> Self {
        let byte_size = MESSAGE_HEADER_BYTES + 8 * payload.len();
        Self { from, kind, payload, byte_size }
    }

    fn from_matrices(from: usize, kind: MessageKind, parts: &[&DenseMatrix]) -> Self {
        let payload = parts.iter().flat_map(|m| m.as_slice().iter().copied()).collect();
        Self::new(from, kind, payload)
    }
}

/// Message and byte totals of one round.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Traffic {
    pub messages: usize,
    pub bytes: usize,
    pub coeffs4_messages: usize,
}

impl Traffic {
    fn of(log: &[ReductionMessage]) -> Self {
        Self {
            messages: log.len(),
            bytes: log.iter().map(|m| m.byte_size).sum(),
            coeffs4_messages: log.iter().filter(|m| m.kind == MessageKind::Coeffs4).count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTraffic {
    pub iteration: usize,
    #[serde(flatten)]
    pub traffic: Traffic,
}

/// Communication summary of a distributed run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunicationReport {
    pub nodes: usize,
    pub setup: Traffic,
    pub per_iteration: Vec<IterationTraffic>,
    pub total_messages: usize,
    pub total_bytes: usize,
}

impl CommunicationReport {
    fn new(nodes: usize, setup: Traffic) -> Self {
        let (total_messages, total_bytes) = (setup.messages, setup.bytes);
        Self { nodes, setup, per_iteration: Vec::new(), total_messages, total_bytes }
    }

    fn push(&mut self, iteration: usize, traffic: Traffic) {
        self.total_messages += traffic.messages;
        self.total_bytes += traffic.bytes;
        self.per_iteration.push(IterationTraffic { iteration, traffic });
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Output of [`distributed_best_response`].
#[derive(Clone, Debug)]
pub struct DistributedResponse {
    /// `𝔹_{P,l}` per node.
    pub bp: Vec<DenseMatrix>,
    pub bq: DenseMatrix,
    pub bs: DenseMatrix,
    pub log: Vec<ReductionMessage>,
}

fn reduce_diag(shards: &[NodeShard], log: &mut Vec<ReductionMessage>) -> Vec<f64> {
    let mut acc = vec![0.0; shards[0].d.cols()];
    for sh in shards {
        sh.d.add_col_norms_sq(&mut acc);
        log.push(ReductionMessage::new(sh.node_id, MessageKind::GramD, acc.clone()));
    }
    acc
}

struct Reduced {
    bp: Vec<DenseMatrix>,
    bq: DenseMatrix,
    bs: DenseMatrix,
}

#[allow(clippy::too_many_arguments)]
fn reduce_best_response(
    shards: &[NodeShard],
    locals: &[LocalPartials],
    q: &DenseMatrix,
    s: &DenseMatrix,
    diag: &[f64],
    lambda: f64,
    mu: f64,
    log: &mut Vec<ReductionMessage>,
) -> Result<Reduced> {
    let mut sums = RowSums::zeros(q.rows(), q.cols(), s.rows());
    for (sh, lp) in shards.iter().zip(locals) {
        sums.add(sh.block(), lp)?;
        log.push(ReductionMessage::from_matrices(sh.node_id, MessageKind::GramPQ, &[&sums.gram_p, &sums.ptw]));
        log.push(ReductionMessage::from_matrices(sh.node_id, MessageKind::ResidualSum, &[&sums.dtr]));
    }
    let qqt = factor_qqt(q, lambda)?;
    let bp = locals.par_iter().map(|lp| best_p(&lp.w, q, &qqt)).collect::<Result<Vec<_>>>()?;
    Ok(Reduced { bp, bq: best_q(&sums.gram_p, &sums.ptw, lambda)?, bs: best_s(s, diag, &sums.dtr, mu) })
}

/// Best response assembled from chained row sums.
pub fn distributed_best_response(
    shards: &[NodeShard],
    q: &DenseMatrix,
    s: &DenseMatrix,
    lambda: f64,
    mu: f64,
) -> Result<DistributedResponse> {
    if shards.is_empty() {
        return Err(Error::InvalidPartition { rows: 0, nodes: 0 });
    }
    let mut log = Vec::new();
    let diag = reduce_diag(shards, &mut log);
    let locals = shards
        .par_iter()
        .map(|sh| local_partials(sh.block(), q, residual(sh.block(), q, s)?))
        .collect::<Result<Vec<_>>>()?;
    let red = reduce_best_response(shards, &locals, q, s, &diag, lambda, mu, &mut log)?;
    Ok(DistributedResponse { bp: red.bp, bq: red.bq, bs: red.bs, log })
}

/// Line-search coefficients by a chained reduction, plus each node's share of
/// them: the change node `l` makes to the running vector. The terms in `Q`
/// and `S` only seed the chain and so belong to node 0.
#[allow(clippy::too_many_arguments)]
pub fn distributed_coeffs(
    shards: &[NodeShard],
    dp: &[DenseMatrix],
    q: &DenseMatrix,
    s: &DenseMatrix,
    dq: &DenseMatrix,
    ds: &DenseMatrix,
    lambda: f64,
    mu: f64,
) -> Result<(QuarticCoeffs, Vec<[f64; 4]>)> {
    let residuals = shards.iter().map(|sh| residual(sh.block(), q, s)).collect::<Result<Vec<_>>>()?;
    let mut bs = s.clone();
    bs.axpy(1.0, ds)?;
    let mu_delta_l1 = mu * (bs.l1_norm() - s.l1_norm());
    let shared = CoeffShared { q, dq, ds, lambda, mu_delta_l1 };
    let (coeffs, _, running) = coeffs_chain(shards, &residuals, dp, &shared)?;
    let mut prev = [0.0; 4];
    let shares = running
        .iter()
        .map(|acc| {
            let share = std::array::from_fn(|i| acc[i] - prev[i]);
            prev = *acc;
            share
        })
        .collect();
    Ok((coeffs, shares))
}

/// Runs the `Coeffs4` chain; returns the result, each node's residual terms
/// and the running vector each node forwarded.
fn coeffs_chain(
    shards: &[NodeShard],
    residuals: &[DenseMatrix],
    dp: &[DenseMatrix],
    shared: &CoeffShared<'_>,
) -> Result<(QuarticCoeffs, Vec<LocalCoeffs>, Vec<[f64; 4]>)> {
    if dp.len() != shards.len() || residuals.len() != shards.len() {
        return Err(Error::InvalidArgument(format!("{} shards but {} direction blocks", shards.len(), dp.len())));
    }
    let mut acc = shared.seed()?;
    let mut terms = Vec::with_capacity(shards.len());
    let mut running = Vec::with_capacity(shards.len());
    for ((sh, r), d) in shards.iter().zip(residuals).zip(dp) {
        terms.push(local_coeffs(sh.block(), r, d, shared, &mut acc)?);
        running.push(acc);
    }
    Ok((QuarticCoeffs::from_array(acc), terms, running))
}

fn chained_objective(shards: &[NodeShard], residuals: &[DenseMatrix], q: &DenseMatrix, s: &DenseMatrix, lambda: f64, mu: f64) -> f64 {
    let mut h = objective_seed(q, s, lambda, mu);
    for (sh, r) in shards.iter().zip(residuals) {
        add_objective(&mut h, r, &sh.p, lambda);
    }
    h
}

/// STELA with every row-coupled quantity formed by chained reductions.
///
/// The objective recorded in the trace is accumulated over the nodes out of
/// band; it is not counted as traffic.
pub fn run_distributed_stela(
    p: &AnomalyProblem,
    z0: &AnomalyState,
    nodes: usize,
    delta: f64,
    max_iter: usize,
) -> Result<(SolveReport<AnomalyState>, CommunicationReport)> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("stop tolerance must be positive, got {delta}")));
    }
    let mut shards = shard(p, z0, nodes)?;
    let (lambda, mu) = (p.lambda(), p.mu());
    let mut watch = Stopwatch::started();
    let mut setup_log = Vec::new();
    let diag = reduce_diag(&shards, &mut setup_log);
    let mut report = CommunicationReport::new(nodes, Traffic::of(&setup_log));

    let mut q = z0.q.clone();
    let mut s = z0.s.clone();
    let mut residuals =
        shards.par_iter().map(|sh| residual(sh.block(), &q, &s)).collect::<Result<Vec<_>>>()?;
    watch.pause();
    let mut h = chained_objective(&shards, &residuals, &q, &s, lambda, mu);
    watch.resume();
    let mut trace = Vec::new();
    let mut counters = Vec::new();

    for t in 0..=max_iter {
        let mut log = Vec::new();
        let locals = shards
            .par_iter()
            .zip(residuals.into_par_iter())
            .map(|(sh, r)| local_partials(sh.block(), &q, r))
            .collect::<Result<Vec<_>>>()?;
        let red = reduce_best_response(&shards, &locals, &q, &s, &diag, lambda, mu, &mut log)?;
        residuals = locals.into_iter().map(|lp| lp.r).collect();
        let dp = shards.iter().zip(&red.bp).map(|(sh, bp)| bp.sub(&sh.p)).collect::<Result<Vec<_>>>()?;
        let dq = red.bq.sub(&q)?;
        let ds = red.bs.sub(&s)?;
        let mu_delta_l1 = mu * (red.bs.l1_norm() - s.l1_norm());
        let shared = CoeffShared { q: &q, dq: &dq, ds: &ds, lambda, mu_delta_l1 };
        let (coeffs, terms, running) = coeffs_chain(&shards, &residuals, &dp, &shared)?;
        for (sh, acc) in shards.iter().zip(&running) {
            log.push(ReductionMessage::new(sh.node_id, MessageKind::Coeffs4, acc.to_vec()));
        }
        report.push(t, Traffic::of(&log));
        counters.push(IterationCounters { model_solves: 1, gplus_evals: 1 });

        let gap = coeffs.d.abs();
        if gap <= delta || t == max_iter {
            watch.pause();
            trace.push(IterationTrace { iteration: t, h_value: h, stationarity_gap: gap, step_size: 0.0, elapsed_seconds: watch.seconds() });
            let (_, _, p_full) = concatenate(&shards)?;
            let solution = AnomalyState { p: p_full, q, s };
            return Ok((SolveReport { solution, trace, converged: gap <= delta, counters }, report));
        }
        if !(coeffs.d < -DESCENT_EPS) {
            return Err(Error::Internal(format!("best response is not a descent direction (slope {}) at iteration {t}", coeffs.d)));
        }
        let gamma = exact_line_search_quartic(coeffs);
        if !(gamma > 0.0) {
            return Err(Error::Internal(format!("zero stepsize along a descent direction at iteration {t}")));
        }

        for (sh, d) in shards.iter_mut().zip(&dp) {
            sh.p.axpy(gamma, d)?;
        }
        q.axpy(gamma, &dq)?;
        s.axpy(gamma, &ds)?;
        if (t + 1) % RESIDUAL_REFRESH == 0 {
            residuals = shards.par_iter().map(|sh| residual(sh.block(), &q, &s)).collect::<Result<Vec<_>>>()?;
        } else {
            for (r, lc) in residuals.iter_mut().zip(&terms) {
                lc.advance(r, gamma)?;
            }
        }
        watch.pause();
        trace.push(IterationTrace { iteration: t, h_value: h, stationarity_gap: gap, step_size: gamma, elapsed_seconds: watch.seconds() });
        let h_next = chained_objective(&shards, &residuals, &q, &s, lambda, mu);
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
    use crate::anomaly::{best_response, generate_data, quartic_coeffs, run_stela};

    fn desk() -> (AnomalyProblem, AnomalyState) {
        let (p, _) = generate_data(21, 30, 25, 3, 9).unwrap();
        let z = p.default_start(4);
        (p, z)
    }

    #[test]
    fn shard_sizes_and_round_trip() {
        let (p, _) = generate_data(5, 6, 4, 2, 1).unwrap();
        let z = p.default_start(1);
        let sh = shard(&p, &z, 2).unwrap();
        assert_eq!(sh.iter().map(|s| s.y.rows()).collect::<Vec<_>>(), vec![3, 2]);
        assert_eq!(sh[1].row_offset, 3);
        let (y, d, pp) = concatenate(&sh).unwrap();
        assert_eq!((&y, &d, &pp), (p.y(), p.d(), &z.p));
        let one = shard(&p, &z, 1).unwrap();
        assert_eq!(one[0].y, *p.y());
        assert!(matches!(shard(&p, &z, 6), Err(Error::InvalidPartition { .. })));
        assert!(shard(&p, &z, 0).is_err());
    }

    #[test]
    fn single_node_matches_centralized_bitwise() {
        let (p, z) = desk();
        let sh = shard(&p, &z, 1).unwrap();
        let dr = distributed_best_response(&sh, &z.q, &z.s, p.lambda(), p.mu()).unwrap();
        let bz = best_response(&p, &z).unwrap();
        assert_eq!((&dr.bp[0], &dr.bq, &dr.bs), (&bz.p, &bz.q, &bz.s));
        assert_eq!(dr.log.len(), 3);
    }

    #[test]
    fn partial_sums_match_centralized() {
        let (p, z) = desk();
        let bz = best_response(&p, &z).unwrap();
        for nodes in [2, 3, 7] {
            let sh = shard(&p, &z, nodes).unwrap();
            let dr = distributed_best_response(&sh, &z.q, &z.s, p.lambda(), p.mu()).unwrap();
            let bp = DenseMatrix::vstack(&dr.bp).unwrap();
            assert!(bp.sub(&bz.p).unwrap().max_abs() <= 1e-10);
            assert!(dr.bq.sub(&bz.q).unwrap().max_abs() <= 1e-10);
            assert!(dr.bs.sub(&bz.s).unwrap().max_abs() <= 1e-10);
            let mut gram = sh[0].p.matmul_tn(&sh[0].p).unwrap();
            for s in &sh[1..] {
                gram.axpy(1.0, &s.p.matmul_tn(&s.p).unwrap()).unwrap();
            }
            assert!(gram.sub(&z.p.matmul_tn(&z.p).unwrap()).unwrap().max_abs() <= 1e-12);
            let last = dr.log.iter().rev().find(|m| m.kind == MessageKind::ResidualSum).unwrap();
            assert_eq!(last.from, nodes - 1);
            assert_eq!(dr.log.iter().filter(|m| m.kind == MessageKind::GramPQ).count(), nodes);
        }
    }

    #[test]
    fn coefficient_shares_sum_to_centralized() {
        let (p, z) = desk();
        let bz = best_response(&p, &z).unwrap();
        let want = quartic_coeffs(&p, &z, &bz).unwrap();
        let dir = bz.sub(&z).unwrap();
        for nodes in [1, 3] {
            let sh = shard(&p, &z, nodes).unwrap();
            let dp: Vec<_> = sh.iter().map(|s| dir.p.row_block(s.row_offset, s.y.rows()).unwrap()).collect();
            let (got, per_node) =
                distributed_coeffs(&sh, &dp, &z.q, &z.s, &dir.q, &dir.s, p.lambda(), p.mu()).unwrap();
            assert_eq!(per_node.len(), nodes);
            for (g, w) in got.to_array().iter().zip(want.to_array()) {
                assert!((g - w).abs() <= 1e-10 * w.abs().max(1.0), "{g} vs {w}");
            }
        }
        let sh = shard(&p, &z, 3).unwrap();
        let zeros: Vec<_> = sh.iter().map(|s| DenseMatrix::zeros(s.y.rows(), 3)).collect();
        let (_, per_node) = distributed_coeffs(
            &sh,
            &zeros,
            &z.q,
            &z.s,
            &DenseMatrix::zeros(3, 30),
            &DenseMatrix::zeros(25, 30),
            p.lambda(),
            p.mu(),
        )
        .unwrap();
        assert!(per_node.iter().all(|v| v.iter().all(|&c| c == 0.0)));
    }

    #[test]
    fn runs_match_centralized() {
        let (p, z) = desk();
        let central = run_stela(&p, &z, 1e-6, 2000).unwrap();
        let (one, _) = run_distributed_stela(&p, &z, 1, 1e-6, 2000).unwrap();
        let strip = |t: &[IterationTrace]| t.iter().map(|r| (r.h_value, r.stationarity_gap, r.step_size)).collect::<Vec<_>>();
        assert_eq!(strip(&one.trace), strip(&central.trace));
        assert_eq!(one.solution, central.solution);
        for nodes in [2, 4, 21] {
            let (r, comm) = run_distributed_stela(&p, &z, nodes, 1e-6, 2000).unwrap();
            assert_eq!(strip(&r.trace), strip(&central.trace));
            assert_eq!(r.solution, central.solution);
            assert!(comm.per_iteration.iter().all(|it| it.traffic.coeffs4_messages == nodes));
            assert_eq!(comm.setup.messages, nodes);
            let again = run_distributed_stela(&p, &z, nodes, 1e-6, 2000).unwrap().1;
            assert_eq!(again, comm);
        }
    }
}
