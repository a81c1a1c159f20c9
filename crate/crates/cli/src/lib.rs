//! The `dcsca` command-line harness: `gen` writes instances, `run` executes
//! one algorithm and writes its trace, `compare` runs several algorithms on one
//! instance and prints time-to-tolerance figures.
//!
//! Exit codes: 0 success, 2 usage, configuration or I/O error, 3 a run hit its
//! iteration cap without converging (the trace is still written).

pub mod config;
pub mod solve;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Parser;
use dcsca_core::io::Instance;
use dcsca_core::sca::trace::{write_csv, write_json};
use dcsca_core::sca::IterationTrace;
use thiserror::Error;

use crate::config::{Cli, Command, Format, RunConfig, ScaleKind};
use crate::solve::{generate, load_instance, run_algorithm, time_to_tolerance, Outcome, INSTANCE_FILE, TRUTH_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

/// Relative errors reported by `compare`.
pub const SUMMARY_TOLERANCES: [f64; 2] = [1e-2, 1e-4];

/// Estimated footprint above which `gen` and `run` print a warning.
const MEMORY_WARN_BYTES: f64 = 1.0e9;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] dcsca_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        EXIT_USAGE
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_owned(), source }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code. Nothing panics past this point on bad input.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(cli.command, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs one subcommand, writing the human-readable report to `out`.
pub fn execute(cmd: Command, out: &mut impl Write) -> Result<i32, CliError> {
    let (flags, kind) = match cmd {
        Command::Gen(o) => (o, "gen"),
        Command::Run(o) => (o, "run"),
        Command::Compare(o) => (o, "compare"),
    };
    let cfg = RunConfig::resolve(flags)?;
    // The global pool can only be built once per process; later calls keep it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    match kind {
        "gen" => cmd_gen(&cfg, out),
        "run" => cmd_run(&cfg, out),
        _ => cmd_compare(&cfg, out),
    }
}

fn warn_memory(cfg: &RunConfig) {
    let bytes = cfg.dims.memory_estimate();
    if cfg.instance.is_none() && (cfg.scale == ScaleKind::Paper || bytes > MEMORY_WARN_BYTES) {
        eprintln!("warning: this instance needs roughly {:.1} GB of memory", bytes / 1e9);
    }
}

fn cmd_gen(cfg: &RunConfig, out: &mut impl Write) -> Result<i32, CliError> {
    let dir = cfg.out.as_ref().ok_or_else(|| CliError::Usage("gen needs --out <directory>".into()))?;
    warn_memory(cfg);
    let (inst, truth) = generate(cfg)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    inst.to_archive().save(dir.join(INSTANCE_FILE))?;
    truth.save(dir.join(TRUTH_FILE))?;
    match &inst {
        Instance::Anomaly(p) => {
            let (n, k, i) = p.dims();
            writeln!(out, "anomaly instance N={n} K={k} I={i} rho={} seed={}", p.rho(), cfg.seed)?;
            writeln!(out, "lambda = {}", p.lambda())?;
            writeln!(out, "mu = {}", p.mu())?;
        }
        Instance::CappedL1(p) => {
            writeln!(out, "capped_l1 instance n={} k={} seed={}", p.rows(), p.cols(), cfg.seed)?;
            writeln!(out, "mu = {}", p.mu())?;
            writeln!(out, "theta = {}", p.theta())?;
        }
    }
    writeln!(out, "wrote {}", dir.display())?;
    Ok(EXIT_OK)
}

fn write_trace(path: &Path, format: Format, trace: &[IterationTrace], timing: bool) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let rows: Vec<IterationTrace> = if timing {
        trace.to_vec()
    } else {
        trace.iter().map(|r| IterationTrace { elapsed_seconds: 0.0, ..*r }).collect()
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    match format {
        Format::Csv => write_csv(&mut w, &rows)?,
        Format::Json => write_json(&mut w, &rows)?,
    }
    w.flush().map_err(io_err(path))
}

fn comm_path(trace_path: &Path) -> PathBuf {
    let stem = trace_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trace".into());
    trace_path.with_file_name(format!("{stem}.comm.json"))
}

fn write_outcome(cfg: &RunConfig, path: &Path, o: &Outcome) -> Result<(), CliError> {
    write_trace(path, cfg.format, &o.trace, cfg.timing)?;
    if let Some(comm) = &o.communication {
        let p = comm_path(path);
        fs::write(&p, comm.to_json()?).map_err(io_err(&p))?;
    }
    Ok(())
}

fn cmd_run(cfg: &RunConfig, out: &mut impl Write) -> Result<i32, CliError> {
    let alg = match cfg.algorithms.as_slice() {
        [a] => *a,
        [] => return Err(CliError::Usage("run needs --algorithm".into())),
        _ => return Err(CliError::Usage("run takes exactly one algorithm; use compare for several".into())),
    };
    warn_memory(cfg);
    let inst = load_instance(cfg)?;
    let o = run_algorithm(cfg, &inst, alg)?;
    if let Some(path) = &cfg.out {
        write_outcome(cfg, path, &o)?;
    }
    let last = o.final_row();
    writeln!(out, "algorithm  {}", alg.name())?;
    writeln!(out, "iterations {}", last.iteration)?;
    writeln!(out, "final h    {}", last.h_value)?;
    writeln!(out, "final gap  {}", last.stationarity_gap)?;
    writeln!(out, "converged  {}", o.converged)?;
    writeln!(out, "seconds    {:.6}", last.elapsed_seconds)?;
    if let Some(comm) = &o.communication {
        writeln!(out, "messages   {} ({} bytes)", comm.total_messages, comm.total_bytes)?;
    }
    Ok(if o.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// One line of the `compare` summary.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub algorithm: String,
    pub final_h: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seconds: f64,
    pub time_to: Vec<Option<f64>>,
}

/// Summary against `h* = min final h` over the compared runs.
pub fn summarize(outcomes: &[Outcome]) -> (f64, Vec<SummaryRow>) {
    let h_star = outcomes.iter().map(|o| o.final_row().h_value).fold(f64::INFINITY, f64::min);
    let rows = outcomes
        .iter()
        .map(|o| {
            let last = o.final_row();
            SummaryRow {
                algorithm: o.algorithm.name().to_owned(),
                final_h: last.h_value,
                iterations: last.iteration,
                converged: o.converged,
                seconds: last.elapsed_seconds,
                time_to: SUMMARY_TOLERANCES.iter().map(|&t| time_to_tolerance(&o.trace, h_star, t)).collect(),
            }
        })
        .collect();
    (h_star, rows)
}

fn fmt_time(t: Option<f64>) -> String {
    t.map_or_else(|| "-".to_owned(), |s| format!("{s:.6}"))
}

fn cmd_compare(cfg: &RunConfig, out: &mut impl Write) -> Result<i32, CliError> {
    if cfg.algorithms.len() < 2 {
        return Err(CliError::Usage("compare needs at least two algorithms (--algorithm a,b)".into()));
    }
    warn_memory(cfg);
    let inst = load_instance(cfg)?;
    let mut outcomes = Vec::new();
    for &alg in &cfg.algorithms {
        outcomes.push(run_algorithm(cfg, &inst, alg)?);
    }
    let (h_star, rows) = summarize(&outcomes);

    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for o in &outcomes {
            write_outcome(cfg, &dir.join(format!("{}.{}", o.algorithm.name(), cfg.format.extension())), o)?;
        }
        let path = dir.join("summary.csv");
        let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
        writeln!(w, "algorithm,final_h,iterations,converged,seconds,time_to_1e-2,time_to_1e-4")?;
        for r in &rows {
            let t: Vec<String> =
                r.time_to.iter().map(|t| t.map_or_else(String::new, |s| if cfg.timing { s.to_string() } else { "0".into() })).collect();
            let secs = if cfg.timing { r.seconds } else { 0.0 };
            writeln!(w, "{},{},{},{},{},{}", r.algorithm, r.final_h, r.iterations, r.converged, secs, t.join(","))?;
        }
        w.flush()?;
    }

    writeln!(out, "reference h* = {h_star}")?;
    writeln!(
        out,
        "{:<18} {:>22} {:>8} {:>9} {:>12} {:>12} {:>12}",
        "algorithm", "final h", "iters", "converged", "seconds", "t(1e-2)", "t(1e-4)"
    )?;
    for r in &rows {
        writeln!(
            out,
            "{:<18} {:>22.12} {:>8} {:>9} {:>12.6} {:>12} {:>12}",
            r.algorithm,
            r.final_h,
            r.iterations,
            r.converged,
            r.seconds,
            fmt_time(r.time_to[0]),
            fmt_time(r.time_to[1])
        )?;
    }
    Ok(EXIT_OK)
}
