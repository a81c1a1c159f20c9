//! Instance construction and the dispatch from [`Algorithm`] to a solver.

use dcsca_core::anomaly::{self, AnomalyProblem, AnomalySurrogate};
use dcsca_core::capped_l1::{self, CappedL1Problem, JacobiSurrogate, CLASSIC_MM_INNER_DELTA, CLASSIC_MM_OUTER_ITERS};
use dcsca_core::distributed::{run_distributed_stela, CommunicationReport};
use dcsca_core::io::{Instance, MatrixArchive};
use dcsca_core::numerics::DenseVector;
use dcsca_core::sca::{gist_baseline, run_sca, IterationTrace, SolveReport, DEFAULT_MAX_ITER};

use crate::config::{Algorithm, Dims, LineSearchChoice, ProblemKind, RunConfig};
use crate::CliError;

/// Sweep cap for BCD when `--max-iter` is not given.
pub const BCD_DEFAULT_SWEEPS: usize = 1000;

/// File name of the instance inside a `gen` output directory.
pub const INSTANCE_FILE: &str = "instance.dcm";
pub const TRUTH_FILE: &str = "truth.dcm";

/// Generated instance with its ground truth archive.
pub fn generate(cfg: &RunConfig) -> Result<(Instance, MatrixArchive), CliError> {
    match cfg.dims {
        Dims::Anomaly { n, k, i, rho } => {
            let (p, truth) = anomaly::generate_data(n, k, i, rho, cfg.seed)?;
            Ok((Instance::Anomaly(p), dcsca_core::io::anomaly_state_archive(&truth)))
        }
        Dims::CappedL1 { n, k, density, noise_var } => {
            let (p, x) = capped_l1::generate_data(n, k, density, noise_var, cfg.seed)?;
            let mut truth = MatrixArchive::new();
            truth.insert_vector("x", &x);
            Ok((Instance::CappedL1(p), truth))
        }
    }
}

/// The instance named by `--instance`, or a freshly generated one, with the
/// `--lambda`, `--mu` and `--theta` overrides applied.
pub fn load_instance(cfg: &RunConfig) -> Result<Instance, CliError> {
    let inst = match &cfg.instance {
        Some(path) => {
            let file = if path.is_dir() { path.join(INSTANCE_FILE) } else { path.clone() };
            let inst = Instance::from_archive(&MatrixArchive::load(&file)?)?;
            let kind = match inst {
                Instance::Anomaly(_) => ProblemKind::Anomaly,
                Instance::CappedL1(_) => ProblemKind::CappedL1,
            };
            if kind != cfg.problem {
                return Err(CliError::Usage(format!(
                    "{} holds a {kind:?} instance but --problem is {:?}",
                    file.display(),
                    cfg.problem
                )));
            }
            inst
        }
        None => generate(cfg)?.0,
    };
    match inst {
        Instance::Anomaly(mut p) => {
            if cfg.theta.is_some() {
                return Err(CliError::Usage("--theta applies to capped_l1 only".into()));
            }
            if let Some(l) = cfg.lambda {
                p = p.with_lambda(l)?;
            }
            if let Some(m) = cfg.mu {
                p = p.with_mu(m)?;
            }
            Ok(Instance::Anomaly(p))
        }
        Instance::CappedL1(mut p) => {
            if cfg.lambda.is_some() {
                return Err(CliError::Usage("--lambda applies to anomaly only".into()));
            }
            if let Some(m) = cfg.mu {
                p = p.with_mu(m)?;
            }
            if let Some(t) = cfg.theta {
                p = p.with_theta(t)?;
            }
            Ok(Instance::CappedL1(p))
        }
    }
}

/// Result of one solver run.
#[derive(Debug)]
pub struct Outcome {
    pub algorithm: Algorithm,
    pub trace: Vec<IterationTrace>,
    pub converged: bool,
    pub communication: Option<CommunicationReport>,
}

impl Outcome {
    fn from_report<X>(algorithm: Algorithm, r: SolveReport<X>) -> Self {
        Self { algorithm, trace: r.trace, converged: r.converged, communication: None }
    }

    pub fn final_row(&self) -> IterationTrace {
        *self.trace.last().expect("solvers record at least one row")
    }
}

fn unsupported(alg: Algorithm, problem: &str) -> CliError {
    CliError::Usage(format!("algorithm {} is not available for {problem}", alg.name()))
}

pub fn run_algorithm(cfg: &RunConfig, inst: &Instance, alg: Algorithm) -> Result<Outcome, CliError> {
    match inst {
        Instance::Anomaly(p) => run_anomaly(cfg, p, alg),
        Instance::CappedL1(p) => run_capped(cfg, p, alg),
    }
}

fn run_anomaly(cfg: &RunConfig, p: &AnomalyProblem, alg: Algorithm) -> Result<Outcome, CliError> {
    let z0 = p.default_start(cfg.seed);
    let max_iter = cfg.max_iter.unwrap_or(DEFAULT_MAX_ITER);
    let out = match alg {
        Algorithm::Stela => match cfg.line_search {
            LineSearchChoice::Exact => Outcome::from_report(alg, anomaly::run_stela(p, &z0, cfg.delta, max_iter)?),
            ls => {
                let spec = ls.spec(cfg.alpha, cfg.beta);
                let r = run_sca(p, &AnomalySurrogate::new(p), spec, &z0.flatten(), cfg.delta, max_iter)?;
                Outcome::from_report(alg, r)
            }
        },
        Algorithm::StelaDistributed => {
            let (r, comm) = run_distributed_stela(p, &z0, cfg.nodes, cfg.delta, max_iter)?;
            Outcome { communication: Some(comm), ..Outcome::from_report(alg, r) }
        }
        Algorithm::Bcd => {
            let sweeps = cfg.max_iter.unwrap_or(BCD_DEFAULT_SWEEPS);
            Outcome::from_report(alg, anomaly::run_bcd(p, &z0, sweeps, cfg.delta)?)
        }
        Algorithm::Admm => Outcome::from_report(alg, anomaly::run_admm(p, &z0, cfg.c, max_iter, cfg.delta)?),
        Algorithm::ClassicMm | Algorithm::ProximalMm | Algorithm::Gist => return Err(unsupported(alg, "anomaly")),
    };
    Ok(out)
}

fn run_capped(cfg: &RunConfig, p: &CappedL1Problem, alg: Algorithm) -> Result<Outcome, CliError> {
    let x0 = DenseVector::zeros(p.cols());
    let max_iter = cfg.max_iter.unwrap_or(DEFAULT_MAX_ITER);
    let out = match alg {
        Algorithm::Stela => match cfg.line_search {
            LineSearchChoice::Exact => Outcome::from_report(alg, capped_l1::run_stela(p, &x0, cfg.delta, max_iter)?),
            ls => {
                let spec = ls.spec(cfg.alpha, cfg.beta);
                Outcome::from_report(alg, run_sca(p, &JacobiSurrogate::new(p), spec, &x0, cfg.delta, max_iter)?)
            }
        },
        Algorithm::ClassicMm => {
            let outer = cfg.max_iter.unwrap_or(CLASSIC_MM_OUTER_ITERS);
            Outcome::from_report(alg, capped_l1::run_classic_mm(p, &x0, outer, CLASSIC_MM_INNER_DELTA)?)
        }
        Algorithm::ProximalMm => Outcome::from_report(
            alg,
            capped_l1::run_proximal_mm(p, &x0, cfg.alpha, cfg.beta, max_iter, cfg.delta)?,
        ),
        Algorithm::Gist => {
            if p.theta().is_finite() {
                return Err(CliError::Usage("gist needs a convex regularizer; pass --theta inf".into()));
            }
            Outcome::from_report(alg, gist_baseline(p, &x0, cfg.beta, cfg.alpha, max_iter, cfg.delta)?)
        }
        Algorithm::Bcd | Algorithm::Admm | Algorithm::StelaDistributed => return Err(unsupported(alg, "capped_l1")),
    };
    Ok(out)
}

/// `(h − h*)/|h*|` drops to `tol` for the first time at this elapsed time.
pub fn time_to_tolerance(trace: &[IterationTrace], h_star: f64, tol: f64) -> Option<f64> {
    let scale = h_star.abs().max(f64::MIN_POSITIVE);
    trace.iter().find(|r| (r.h_value - h_star) / scale <= tol).map(|r| r.elapsed_seconds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(h: f64, s: f64) -> IterationTrace {
        IterationTrace { iteration: 0, h_value: h, stationarity_gap: 0.0, step_size: 0.0, elapsed_seconds: s }
    }

    #[test]
    fn tolerance_crossing() {
        let t = [row(3.0, 0.0), row(1.5, 1.0), row(1.001, 2.0), row(1.0, 3.0)];
        assert_eq!(time_to_tolerance(&t, 1.0, 1e-2), Some(2.0));
        assert_eq!(time_to_tolerance(&t, 1.0, 0.0), Some(3.0));
        assert_eq!(time_to_tolerance(&t, 0.5, 1e-2), None);
    }
}
