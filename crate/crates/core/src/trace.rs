//! Attacker-side reconstruction of victim durations.
//!
//! The attacker only sees its own probe jobs. The idle interval between two
//! consecutive probes holds some number of victim executions; dividing the
//! interval by the inferred count gives one per-execution estimate.
//!
//! When an interval holds k > 1 executions, all k estimates are the same
//! number (the interval mean), so they are not independent draws: their
//! spread is about σ/√k rather than σ. Statistics built on a trace should
//! therefore count intervals, not executions; [`Trace::samples`] returns one
//! value per interval for that purpose.

use std::io::Write;

use thiserror::Error;

use crate::cloudsim::{JobLog, Owner};

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("need at least {needed} probes, got {got}")]
    TooFewProbes { needed: usize, got: usize },
    #[error("probe {0} overlaps or precedes its predecessor")]
    Overlap(usize),
    #[error("probe {0} has an invalid time span")]
    BadProbe(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// The attacker's own job timestamps, `(started_at, ended_at)` per probe.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackerView {
    probes: Vec<(f64, f64)>,
}

impl AttackerView {
    pub fn new(probes: Vec<(f64, f64)>) -> Result<Self, TraceError> {
        for (i, &(s, e)) in probes.iter().enumerate() {
            if !(s.is_finite() && e.is_finite() && s <= e) {
                return Err(TraceError::BadProbe(i));
            }
            if i > 0 && s < probes[i - 1].1 {
                return Err(TraceError::Overlap(i));
            }
        }
        Ok(Self { probes })
    }

    /// Keeps only attacker-owned records; victim jobs are invisible.
    pub fn from_log(log: &JobLog) -> Result<Self, TraceError> {
        Self::new(
            log.records
                .iter()
                .filter(|r| r.owner == Owner::Attacker)
                .map(|r| (r.started_at, r.ended_at))
                .collect(),
        )
    }

    pub fn probes(&self) -> &[(f64, f64)] {
        &self.probes
    }
}

/// `probe[i+1].started_at − probe[i].ended_at` for each consecutive pair.
pub fn extract_intervals(view: &AttackerView) -> Result<Vec<f64>, TraceError> {
    if view.probes.len() < 2 {
        return Err(TraceError::TooFewProbes {
            needed: 2,
            got: view.probes.len(),
        });
    }
    Ok(view.probes.windows(2).map(|w| w[1].0 - w[0].1).collect())
}

/// Number of victim runs in `interval` and the per-run duration.
///
/// Rounds to the nearest integer with exact halves going down, and never
/// reports zero runs for a non-empty interval. An empty interval is
/// `(0, 0.0)`.
pub fn infer_execution_count(interval: f64, avg_victim: f64) -> Result<(usize, f64), TraceError> {
    if !(avg_victim > 0.0) || !avg_victim.is_finite() {
        return Err(TraceError::InvalidArgument(format!(
            "average victim duration must be positive, got {avg_victim}"
        )));
    }
    if !(interval >= 0.0) || !interval.is_finite() {
        return Err(TraceError::InvalidArgument(format!(
            "interval must be finite and non-negative, got {interval}"
        )));
    }
    if interval == 0.0 {
        return Ok((0, 0.0));
    }
    let count = ((interval / avg_victim - 0.5).ceil() as usize).max(1);
    Ok((count, interval / count as f64))
}

/// Reconstructed victim durations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    /// One entry per inferred execution.
    pub durations: Vec<f64>,
    /// Executions inferred in each retained interval.
    pub inferred_counts: Vec<usize>,
    /// Per-execution estimate of each retained interval.
    per_interval: Vec<f64>,
    /// Intervals discarded because the gap correction consumed them.
    pub dropped: usize,
}

impl Trace {
    /// A trace of directly observed single executions.
    pub fn from_durations(durations: Vec<f64>) -> Self {
        Self {
            inferred_counts: vec![1; durations.len()],
            per_interval: durations.clone(),
            durations,
            dropped: 0,
        }
    }

    /// One value per interval; the independent observations of the trace.
    pub fn samples(&self) -> &[f64] {
        &self.per_interval
    }

    pub fn effective_len(&self) -> usize {
        self.per_interval.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_interval.is_empty()
    }

    /// Single-column CSV of per-execution durations.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["duration_s"])?;
        for d in &self.durations {
            w.write_record([d.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Turns probe intervals into per-execution durations.
///
/// An interval holding k runs also holds k + 1 scheduler gaps (probe to
/// first run, between runs, last run to probe), so `gap_correction` is
/// subtracted k + 1 times. Runs are counted on `interval − gap` against
/// `avg_victim + gap`. Intervals left non-positive after correction are
/// dropped and counted; intervals with no runs are skipped.
pub fn assemble_trace(
    view: &AttackerView,
    avg_victim: f64,
    gap_correction: f64,
) -> Result<Trace, TraceError> {
    check_gap(gap_correction)?;
    build_trace(view, gap_correction, |interval| {
        if gap_correction == 0.0 {
            infer_execution_count(interval, avg_victim)
        } else {
            infer_execution_count((interval - gap_correction).max(0.0), avg_victim + gap_correction)
        }
        .map(|(count, _)| count)
    })
}

/// Like [`assemble_trace`], for an attacker who knows every interval holds
/// exactly `runs` victim executions (for instance because the probe schedule
/// is synchronised with the victim's submissions). No counting takes place,
/// so high-variance circuits are not split or merged by mistake.
pub fn assemble_trace_known_count(
    view: &AttackerView,
    runs: usize,
    gap_correction: f64,
) -> Result<Trace, TraceError> {
    if runs == 0 {
        return Err(TraceError::InvalidArgument("runs per interval must be at least 1".into()));
    }
    check_gap(gap_correction)?;
    build_trace(view, gap_correction, |_| Ok(runs))
}

fn check_gap(gap_correction: f64) -> Result<(), TraceError> {
    if !(gap_correction >= 0.0) || !gap_correction.is_finite() {
        return Err(TraceError::InvalidArgument(format!(
            "gap correction must be finite and non-negative, got {gap_correction}"
        )));
    }
    Ok(())
}

fn build_trace<F>(view: &AttackerView, gap_correction: f64, count_of: F) -> Result<Trace, TraceError>
where
    F: Fn(f64) -> Result<usize, TraceError>,
{
    let intervals = extract_intervals(view)?;
    let mut trace = Trace::default();
    for interval in intervals {
        let count = count_of(interval)?;
        if count == 0 {
            continue;
        }
        let busy = interval - gap_correction * (count + 1) as f64;
        if !(busy > 0.0) {
            trace.dropped += 1;
            continue;
        }
        let per = busy / count as f64;
        trace.per_interval.push(per);
        trace.inferred_counts.push(count);
        trace.durations.extend(std::iter::repeat_n(per, count));
    }
    Ok(trace)
}

/// Estimates the victim's mean duration from warm-up intervals recorded with
/// one victim run between probes.
pub fn bootstrap_avg_victim(warmup: &[f64], gap_correction: f64) -> Result<f64, TraceError> {
    if warmup.is_empty() {
        return Err(TraceError::InvalidArgument("no warm-up intervals".into()));
    }
    let mean = warmup.iter().sum::<f64>() / warmup.len() as f64 - 2.0 * gap_correction;
    if !(mean > 0.0) {
        return Err(TraceError::InvalidArgument(format!(
            "warm-up intervals give a non-positive average {mean}"
        )));
    }
    Ok(mean)
}
