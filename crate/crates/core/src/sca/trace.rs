use std::io::{BufRead, Write};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of a solver trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    #[serde(rename = "iter")]
    pub iteration: usize,
    #[serde(rename = "h")]
    pub h_value: f64,
    #[serde(rename = "gap")]
    pub stationarity_gap: f64,
    #[serde(rename = "gamma")]
    pub step_size: f64,
    #[serde(rename = "seconds")]
    pub elapsed_seconds: f64,
}

pub const CSV_HEADER: &str = "iter,h,gap,gamma,seconds";

pub fn write_csv(mut w: impl Write, trace: &[IterationTrace]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in trace {
        writeln!(w, "{},{},{},{},{}", r.iteration, r.h_value, r.stationarity_gap, r.step_size, r.elapsed_seconds)?;
    }
    Ok(())
}

pub fn read_csv(r: impl BufRead) -> Result<Vec<IterationTrace>> {
    let mut lines = r.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == CSV_HEADER => {}
        other => return Err(Error::Format(format!("expected trace header, found {other:?}"))),
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(Error::Format(format!("trace row with {} columns", cols.len())));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Format(format!("{s}: {e}")));
        out.push(IterationTrace {
            iteration: cols[0].trim().parse().map_err(|e| Error::Format(format!("{}: {e}", cols[0])))?,
            h_value: num(cols[1])?,
            stationarity_gap: num(cols[2])?,
            step_size: num(cols[3])?,
            elapsed_seconds: num(cols[4])?,
        });
    }
    Ok(out)
}

pub fn write_json(w: impl Write, trace: &[IterationTrace]) -> Result<()> {
    serde_json::to_writer_pretty(w, trace).map_err(|e| Error::Io(e.to_string()))
}

/// Accumulating stopwatch; time spent while paused (trace bookkeeping) is not counted.
#[derive(Debug)]
pub struct Stopwatch {
    total: Duration,
    running_since: Option<Instant>,
}

impl Stopwatch {
    pub fn started() -> Self {
        Self { total: Duration::ZERO, running_since: Some(Instant::now()) }
    }

    pub fn pause(&mut self) {
        if let Some(t) = self.running_since.take() {
            self.total += t.elapsed();
        }
    }

    pub fn resume(&mut self) {
        if self.running_since.is_none() {
            self.running_since = Some(Instant::now());
        }
    }

    pub fn seconds(&self) -> f64 {
        let live = self.running_since.map_or(Duration::ZERO, |t| t.elapsed());
        (self.total + live).as_secs_f64()
    }
}

/// Whether consecutive `h` values never increase by more than `rel_tol·max(1, |h|)`.
pub fn is_monotone(trace: &[IterationTrace], rel_tol: f64) -> bool {
    trace.windows(2).all(|w| w[1].h_value <= w[0].h_value + rel_tol * w[0].h_value.abs().max(1.0))
}

/// Whole-run result of an iterative solver.
#[derive(Clone, Debug)]
pub struct SolveReport<X> {
    pub solution: X,
    pub trace: Vec<IterationTrace>,
    /// Stop criterion met before the iteration cap.
    pub converged: bool,
    pub counters: Vec<IterationCounters>,
}

impl<X> SolveReport<X> {
    /// Number of updates performed (rows in the trace minus the initial record).
    pub fn iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }

    pub fn final_h(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.h_value)
    }
}

/// Per-iteration work counters for complexity comparisons.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationCounters {
    /// Approximate (or proximal model) problems solved.
    pub model_solves: usize,
    /// Evaluations of `g⁺` at a candidate point.
    pub gplus_evals: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<IterationTrace> {
        vec![
            IterationTrace { iteration: 0, h_value: 4.5, stationarity_gap: 9.0, step_size: 1.0, elapsed_seconds: 0.0 },
            IterationTrace { iteration: 1, h_value: 1.25e-3, stationarity_gap: 0.0, step_size: 0.0, elapsed_seconds: 1.5e-6 },
        ]
    }

    #[test]
    fn csv_round_trip() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("iter,h,gap,gamma,seconds\n0,4.5,9,1,0\n"));
        assert_eq!(read_csv(&buf[..]).unwrap(), sample());
        assert!(read_csv(&b"a,b\n"[..]).is_err());
    }

    #[test]
    fn json_field_names() {
        let mut buf = Vec::new();
        write_json(&mut buf, &sample()).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let row = &v[0];
        for key in ["iter", "h", "gap", "gamma", "seconds"] {
            assert!(row.get(key).is_some(), "{key}");
        }
        let back: Vec<IterationTrace> = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, sample());
    }

    #[test]
    fn monotone_check() {
        let mut t = sample();
        assert!(is_monotone(&t, 1e-10));
        t[1].h_value = 5.0;
        assert!(!is_monotone(&t, 1e-10));
    }

    #[test]
    fn stopwatch_pauses() {
        let mut s = Stopwatch::started();
        s.pause();
        let a = s.seconds();
        std::thread::sleep(Duration::from_millis(5));
        assert_eq!(s.seconds(), a);
        s.resume();
        std::thread::sleep(Duration::from_millis(2));
        assert!(s.seconds() > a);
    }
}
