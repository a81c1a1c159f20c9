//! Command-line flags, `key=value` config files, and their merge into a
//! [`RunConfig`]. A flag always wins over the same key in the config file.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dcsca_core::sca::LineSearchSpec;

use crate::CliError;

/// Environment variable consulted when no seed is given.
pub const SEED_ENV: &str = "DCSCA_SEED";

#[derive(Parser, Debug)]
#[command(name = "dcsca", version, about = "Successive convex approximation solvers and benchmark harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate an instance and its ground truth.
    Gen(Options),
    /// Run one algorithm and write its trace.
    Run(Options),
    /// Run several algorithms on the same instance and summarize.
    Compare(Options),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProblemKind {
    Anomaly,
    #[value(name = "capped_l1", alias = "capped-l1")]
    CappedL1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScaleKind {
    Desk,
    Paper,
    Explicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Stela,
    Bcd,
    Admm,
    #[value(name = "classic_mm", alias = "classic-mm")]
    ClassicMm,
    #[value(name = "proximal_mm", alias = "proximal-mm")]
    ProximalMm,
    Gist,
    #[value(name = "stela_distributed", alias = "stela-distributed")]
    StelaDistributed,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Stela => "stela",
            Algorithm::Bcd => "bcd",
            Algorithm::Admm => "admm",
            Algorithm::ClassicMm => "classic_mm",
            Algorithm::ProximalMm => "proximal_mm",
            Algorithm::Gist => "gist",
            Algorithm::StelaDistributed => "stela_distributed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Timing {
    On,
    Off,
}

/// Flags shared by all subcommands. Every flag is optional so that the config
/// file can supply it; defaults are applied during resolution.
#[derive(Args, Debug, Clone, Default)]
pub struct Options {
    /// Flat `key=value` file; keys are the long flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Instance file written by `gen` (or the directory holding it).
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub problem: Option<ProblemKind>,
    #[arg(long, value_enum)]
    pub scale: Option<ScaleKind>,
    /// Rows: N (anomaly) or n (capped_l1).
    #[arg(long)]
    pub n: Option<usize>,
    /// Columns: K (anomaly) or k (capped_l1).
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of links I (anomaly).
    #[arg(long)]
    pub i: Option<usize>,
    /// Factor rank (anomaly).
    #[arg(long)]
    pub rho: Option<usize>,
    /// Fraction of nonzeros in the true signal (capped_l1).
    #[arg(long)]
    pub density: Option<f64>,
    /// Noise variance (capped_l1).
    #[arg(long)]
    pub noise_var: Option<f64>,
    /// Falls back to the DCSCA_SEED environment variable, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// One algorithm for `run`; a comma-separated list for `compare`.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub algorithm: Vec<Algorithm>,
    /// Stopping tolerance; its meaning depends on the algorithm.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Iteration cap (sweeps for bcd, outer iterations for classic_mm).
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// `exact`, `successive` or `constant[=gamma]`.
    #[arg(long)]
    pub line_search: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// ADMM penalty.
    #[arg(long)]
    pub c: Option<f64>,
    /// Cap of the capped-l1 penalty; `inf` gives the LASSO.
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Node count for stela_distributed.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Solver threads.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory (gen, compare) or trace file (run).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// `off` writes zero seconds so traces are byte-reproducible.
    #[arg(long, value_enum)]
    pub timing: Option<Timing>,
}

/// Instance dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Dims {
    Anomaly { n: usize, k: usize, i: usize, rho: usize },
    CappedL1 { n: usize, k: usize, density: f64, noise_var: f64 },
}

impl Dims {
    pub fn preset(problem: ProblemKind, scale: ScaleKind) -> Self {
        match (problem, scale) {
            (ProblemKind::Anomaly, ScaleKind::Paper) => Dims::Anomaly { n: 1000, k: 4000, i: 4000, rho: 10 },
            (ProblemKind::Anomaly, _) => Dims::Anomaly { n: 50, k: 100, i: 100, rho: 5 },
            (ProblemKind::CappedL1, ScaleKind::Paper) => {
                Dims::CappedL1 { n: 10_000, k: 50_000, density: 0.1, noise_var: 1e-4 }
            }
            (ProblemKind::CappedL1, _) => Dims::CappedL1 { n: 200, k: 1000, density: 0.1, noise_var: 1e-4 },
        }
    }

    /// Rough peak memory of generation plus one solver run, in bytes.
    pub fn memory_estimate(&self) -> f64 {
        let doubles = match *self {
            Dims::Anomaly { n, k, i, rho } => 3 * n * k + n * i + 4 * i * k + 4 * (n + k) * rho,
            Dims::CappedL1 { n, k, .. } => n * k + 6 * k + 4 * n,
        };
        8.0 * doubles as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LineSearchChoice {
    Exact,
    Successive,
    Constant(f64),
}

impl LineSearchChoice {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let s = s.trim();
        match s {
            "exact" => Ok(Self::Exact),
            "successive" => Ok(Self::Successive),
            "constant" => Ok(Self::Constant(1.0)),
            _ => match s.strip_prefix("constant=") {
                Some(g) => {
                    let gamma: f64 = parse_num("line_search", g)?;
                    if gamma > 0.0 && gamma <= 1.0 {
                        Ok(Self::Constant(gamma))
                    } else {
                        Err(CliError::Usage(format!("constant stepsize must lie in (0, 1], got {gamma}")))
                    }
                }
                None => Err(CliError::Usage(format!(
                    "unknown line search `{s}`; expected exact, successive or constant[=gamma]"
                ))),
            },
        }
    }

    pub fn spec(self, alpha: f64, beta: f64) -> LineSearchSpec {
        match self {
            Self::Exact => LineSearchSpec::Exact,
            Self::Successive => LineSearchSpec::Successive { alpha, beta, m_max: SUCCESSIVE_MAX_BACKTRACK },
            Self::Constant(gamma) => LineSearchSpec::Constant { gamma },
        }
    }
}

pub const SUCCESSIVE_MAX_BACKTRACK: usize = 60;
pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_BETA: f64 = 0.5;
pub const DEFAULT_NODES: usize = 4;

/// Fully resolved settings of one invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub instance: Option<PathBuf>,
    pub problem: ProblemKind,
    pub scale: ScaleKind,
    pub dims: Dims,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub delta: f64,
    pub max_iter: Option<usize>,
    pub line_search: LineSearchChoice,
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub theta: Option<f64>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub nodes: usize,
    pub threads: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub timing: bool,
}

/// Parses a `key=value` file. Blank lines and lines starting with `#` are
/// skipped; `-` and `_` are interchangeable in keys.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value, got `{line}`", lineno + 1)))?;
        let key = key.trim().replace('-', "_");
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("config line {}: unknown key `{key}`", lineno + 1)));
        }
        out.insert(key, value.trim().to_owned());
    }
    Ok(out)
}

const KNOWN_KEYS: &[&str] = &[
    "instance", "problem", "scale", "n", "k", "i", "rho", "density", "noise_var", "seed", "algorithm", "delta",
    "max_iter", "line_search", "alpha", "beta", "c", "theta", "lambda", "mu", "nodes", "threads", "out", "format",
    "timing",
];

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim().parse().map_err(|_| CliError::Usage(format!("invalid value `{v}` for `{key}`")))
}

fn parse_enum<T: ValueEnum>(key: &str, v: &str) -> Result<T, CliError> {
    T::from_str(v.trim(), true).map_err(|_| CliError::Usage(format!("invalid value `{v}` for `{key}`")))
}

/// Fills every unset flag from the config map.
fn merge(mut o: Options, cfg: &BTreeMap<String, String>) -> Result<Options, CliError> {
    macro_rules! fill {
        ($field:ident, $parse:expr) => {
            if o.$field.is_none() {
                if let Some(v) = cfg.get(stringify!($field)) {
                    o.$field = Some($parse(stringify!($field), v)?);
                }
            }
        };
    }
    let path = |_: &str, v: &String| -> Result<PathBuf, CliError> { Ok(PathBuf::from(v)) };
    let text = |_: &str, v: &String| -> Result<String, CliError> { Ok(v.clone()) };
    fill!(instance, path);
    fill!(problem, |k, v: &String| parse_enum(k, v));
    fill!(scale, |k, v: &String| parse_enum(k, v));
    fill!(n, |k, v: &String| parse_num(k, v));
    fill!(k, |k, v: &String| parse_num(k, v));
    fill!(i, |k, v: &String| parse_num(k, v));
    fill!(rho, |k, v: &String| parse_num(k, v));
    fill!(density, |k, v: &String| parse_num(k, v));
    fill!(noise_var, |k, v: &String| parse_num(k, v));
    fill!(seed, |k, v: &String| parse_num(k, v));
    fill!(delta, |k, v: &String| parse_num(k, v));
    fill!(max_iter, |k, v: &String| parse_num(k, v));
    fill!(line_search, text);
    fill!(alpha, |k, v: &String| parse_num(k, v));
    fill!(beta, |k, v: &String| parse_num(k, v));
    fill!(c, |k, v: &String| parse_num(k, v));
    fill!(theta, |k, v: &String| parse_num(k, v));
    fill!(lambda, |k, v: &String| parse_num(k, v));
    fill!(mu, |k, v: &String| parse_num(k, v));
    fill!(nodes, |k, v: &String| parse_num(k, v));
    fill!(threads, |k, v: &String| parse_num(k, v));
    fill!(out, path);
    fill!(format, |k, v: &String| parse_enum(k, v));
    fill!(timing, |k, v: &String| parse_enum(k, v));
    if o.algorithm.is_empty() {
        if let Some(v) = cfg.get("algorithm") {
            o.algorithm = v.split(',').map(|a| parse_enum("algorithm", a)).collect::<Result<_, _>>()?;
        }
    }
    Ok(o)
}

impl RunConfig {
    /// Merges flags, the config file named by `--config`, the seed environment
    /// variable and the defaults, then validates the result.
    pub fn resolve(flags: Options) -> Result<Self, CliError> {
        let cfg = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        let o = merge(flags, &cfg)?;

        let seed = match o.seed {
            Some(s) => s,
            None => match std::env::var(SEED_ENV) {
                Ok(v) => parse_num(SEED_ENV, &v)?,
                Err(_) => 0,
            },
        };
        let problem = o.problem.unwrap_or(ProblemKind::Anomaly);
        let explicit_dims = o.n.is_some() || o.k.is_some() || o.i.is_some() || o.rho.is_some();
        let scale = o.scale.unwrap_or(if explicit_dims { ScaleKind::Explicit } else { ScaleKind::Desk });
        let dims = match Dims::preset(problem, scale) {
            Dims::Anomaly { n, k, i, rho } if scale == ScaleKind::Explicit => Dims::Anomaly {
                n: o.n.unwrap_or(n),
                k: o.k.unwrap_or(k),
                i: o.i.unwrap_or(i),
                rho: o.rho.unwrap_or(rho),
            },
            Dims::CappedL1 { n, k, density, noise_var } if scale == ScaleKind::Explicit => Dims::CappedL1 {
                n: o.n.unwrap_or(n),
                k: o.k.unwrap_or(k),
                density: o.density.unwrap_or(density),
                noise_var: o.noise_var.unwrap_or(noise_var),
            },
            preset => {
                if explicit_dims {
                    return Err(CliError::Usage("dimension flags require --scale explicit".into()));
                }
                preset
            }
        };

        let delta = o.delta.unwrap_or(dcsca_core::sca::DEFAULT_DELTA);
        if !(delta > 0.0) {
            return Err(CliError::Usage(format!("--delta must be positive, got {delta}")));
        }
        let alpha = o.alpha.unwrap_or(DEFAULT_ALPHA);
        let beta = o.beta.unwrap_or(DEFAULT_BETA);
        if !(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0) {
            return Err(CliError::Usage(format!("--alpha and --beta must lie in (0, 1), got {alpha} and {beta}")));
        }
        let c = o.c.unwrap_or(dcsca_core::anomaly::ADMM_DEFAULT_C);
        if !(c > 0.0) || !c.is_finite() {
            return Err(CliError::Usage(format!("--c must be positive, got {c}")));
        }
        let nodes = o.nodes.unwrap_or(DEFAULT_NODES);
        let threads = o.threads.unwrap_or(1);
        if nodes == 0 || threads == 0 {
            return Err(CliError::Usage("--nodes and --threads must be at least 1".into()));
        }
        let line_search = match &o.line_search {
            Some(s) => LineSearchChoice::parse(s)?,
            None => LineSearchChoice::Exact,
        };
        Ok(Self {
            instance: o.instance,
            problem,
            scale,
            dims,
            seed,
            algorithms: o.algorithm,
            delta,
            max_iter: o.max_iter,
            line_search,
            alpha,
            beta,
            c,
            theta: o.theta,
            lambda: o.lambda,
            mu: o.mu,
            nodes,
            threads,
            out: o.out,
            format: o.format.unwrap_or(Format::Csv),
            timing: o.timing != Some(Timing::Off),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_parsing() {
        let m = parse_config_text("# comment\nproblem = capped_l1\nmax-iter=30\n\n").unwrap();
        assert_eq!(m.get("problem").unwrap(), "capped_l1");
        assert_eq!(m.get("max_iter").unwrap(), "30");
        assert!(parse_config_text("no equals sign").is_err());
        assert!(parse_config_text("colour=blue").is_err());
    }

    #[test]
    fn flags_win_over_config() {
        let cfg = parse_config_text("seed=5\ndelta=0.01\nalgorithm=stela,bcd").unwrap();
        let flags = Options { seed: Some(9), ..Default::default() };
        let o = merge(flags, &cfg).unwrap();
        assert_eq!(o.seed, Some(9));
        assert_eq!(o.delta, Some(0.01));
        assert_eq!(o.algorithm, vec![Algorithm::Stela, Algorithm::Bcd]);
    }

    #[test]
    fn presets_and_explicit_dims() {
        let c = RunConfig::resolve(Options { problem: Some(ProblemKind::CappedL1), ..Default::default() }).unwrap();
        assert_eq!(c.dims, Dims::CappedL1 { n: 200, k: 1000, density: 0.1, noise_var: 1e-4 });
        let c = RunConfig::resolve(Options { n: Some(7), rho: Some(2), ..Default::default() }).unwrap();
        assert_eq!(c.scale, ScaleKind::Explicit);
        assert_eq!(c.dims, Dims::Anomaly { n: 7, k: 100, i: 100, rho: 2 });
        let bad = Options { n: Some(7), scale: Some(ScaleKind::Desk), ..Default::default() };
        assert!(RunConfig::resolve(bad).is_err());
        assert!(Dims::preset(ProblemKind::CappedL1, ScaleKind::Paper).memory_estimate() > 3e9);
    }

    #[test]
    fn line_search_choices() {
        assert_eq!(LineSearchChoice::parse("constant=0.5").unwrap(), LineSearchChoice::Constant(0.5));
        assert_eq!(LineSearchChoice::parse("successive").unwrap(), LineSearchChoice::Successive);
        assert!(LineSearchChoice::parse("constant=2").is_err());
        assert!(LineSearchChoice::parse("armijo").is_err());
    }
}
