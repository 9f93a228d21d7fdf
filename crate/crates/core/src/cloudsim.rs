//! Seeded simulation of a single-queue cloud quantum backend.
//!
//! Jobs run strictly one after another. The attacker submits a probe job,
//! then `k` victim jobs run, then the next probe, and so on; the log records
//! every job's timestamps on one abstract monotonic clock.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{StatsError, TimingDistribution};

/// Durations below this are clamped (and counted) so that every job has
/// positive length.
pub const DURATION_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("circuit {circuit:?} is not defined on device {device:?}")]
    UnknownCircuit { device: String, circuit: String },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("malformed job log: {0}")]
    MalformedLog(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Timing behaviour of one backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub name: String,
    #[serde(rename = "circuits")]
    pub circuit_timings: BTreeMap<String, TimingDistribution>,
    /// Fixed idle time between consecutive jobs, seconds.
    #[serde(default)]
    pub inter_job_gap: f64,
    /// Alternative compiled placements: each job adds one offset, chosen
    /// uniformly, to its circuit's mean. Empty means a single placement.
    #[serde(default)]
    pub placement_offsets: Vec<f64>,
    /// Minimum number of victim jobs the scheduler runs back to back.
    #[serde(default = "one")]
    pub batching: usize,
}

fn one() -> usize {
    1
}

impl DeviceProfile {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            circuit_timings: BTreeMap::new(),
            inter_job_gap: 0.0,
            placement_offsets: Vec::new(),
            batching: 1,
        }
    }

    pub fn with_circuit(mut self, circuit: impl Into<String>, timing: TimingDistribution) -> Self {
        self.circuit_timings.insert(circuit.into(), timing);
        self
    }

    pub fn with_gap(mut self, gap: f64) -> Self {
        self.inter_job_gap = gap;
        self
    }

    pub fn timing(&self, circuit: &str) -> Result<&TimingDistribution, SimError> {
        self.circuit_timings
            .get(circuit)
            .ok_or_else(|| SimError::UnknownCircuit {
                device: self.name.clone(),
                circuit: circuit.to_string(),
            })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for t in self.circuit_timings.values() {
            t.validate()?;
        }
        if !(self.inter_job_gap >= 0.0) || !self.inter_job_gap.is_finite() {
            return Err(SimError::InvalidScenario(format!(
                "inter_job_gap must be finite and non-negative, got {}",
                self.inter_job_gap
            )));
        }
        if self.placement_offsets.iter().any(|o| !o.is_finite()) {
            return Err(SimError::InvalidScenario("placement offsets must be finite".into()));
        }
        if self.batching == 0 {
            return Err(SimError::InvalidScenario("batching must be at least 1".into()));
        }
        Ok(())
    }

    /// One job duration and whether it was clamped to the floor.
    fn draw<R: Rng + ?Sized>(&self, timing: &TimingDistribution, rng: &mut R) -> (f64, bool) {
        let offset = match self.placement_offsets.len() {
            0 => 0.0,
            len => self.placement_offsets[rng.random_range(0..len)],
        };
        let z: f64 = StandardNormal.sample(rng);
        let d = timing.mean + offset + timing.std_dev() * z;
        if d < DURATION_FLOOR {
            (DURATION_FLOOR, true)
        } else {
            (d, false)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub device: DeviceProfile,
    pub victim_circuit: String,
    pub victim_repetitions: usize,
    pub probe_circuit: String,
    /// A probe runs after every `probe_every` victim jobs.
    pub probe_every: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        self.device.validate()?;
        if self.victim_repetitions == 0 {
            return Err(SimError::InvalidScenario("victim_repetitions must be at least 1".into()));
        }
        if self.probe_every == 0 {
            return Err(SimError::InvalidScenario("probe_every must be at least 1".into()));
        }
        self.device.timing(&self.victim_circuit)?;
        self.device.timing(&self.probe_circuit)?;
        Ok(())
    }

    /// Victim jobs between consecutive probes once scheduler batching is
    /// taken into account.
    pub fn effective_probe_every(&self) -> usize {
        self.probe_every.max(self.device.batching)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Owner {
    Victim,
    Attacker,
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Owner::Victim => "victim",
            Owner::Attacker => "attacker",
        })
    }
}

impl FromStr for Owner {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "victim" => Ok(Owner::Victim),
            "attacker" => Ok(Owner::Attacker),
            other => Err(SimError::MalformedLog(format!("unknown owner {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: usize,
    pub owner: Owner,
    pub circuit: String,
    pub queued_at: f64,
    pub started_at: f64,
    pub ended_at: f64,
}

impl JobRecord {
    pub fn duration(&self) -> f64 {
        self.ended_at - self.started_at
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct JobLog {
    pub records: Vec<JobRecord>,
    /// Draws that fell below [`DURATION_FLOOR`] and were clamped.
    pub truncated: usize,
}

impl JobLog {
    /// Checks id order, `queued ≤ started < ended` and disjointness.
    pub fn validate(&self) -> Result<(), SimError> {
        let mut prev_end = f64::NEG_INFINITY;
        for (i, r) in self.records.iter().enumerate() {
            if r.job_id != i {
                return Err(SimError::MalformedLog(format!(
                    "job {} at position {i}",
                    r.job_id
                )));
            }
            if !(r.queued_at <= r.started_at && r.started_at < r.ended_at) {
                return Err(SimError::MalformedLog(format!(
                    "job {} has inconsistent timestamps",
                    r.job_id
                )));
            }
            if r.started_at < prev_end {
                return Err(SimError::MalformedLog(format!(
                    "job {} overlaps its predecessor",
                    r.job_id
                )));
            }
            prev_end = r.ended_at;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["job_id", "owner", "circuit", "queued_at", "started_at", "ended_at"])?;
        for r in &self.records {
            w.write_record([
                r.job_id.to_string(),
                r.owner.to_string(),
                r.circuit.clone(),
                r.queued_at.to_string(),
                r.started_at.to_string(),
                r.ended_at.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, SimError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let records = rdr
            .deserialize::<JobRecord>()
            .collect::<Result<Vec<_>, _>>()?;
        let log = JobLog {
            records,
            truncated: 0,
        };
        log.validate()?;
        Ok(log)
    }
}

/// Runs the scenario. Identical scenarios (seed included) give identical logs.
pub fn run_simulation(scenario: &Scenario) -> Result<JobLog, SimError> {
    scenario.validate()?;
    let device = &scenario.device;
    let victim = device.timing(&scenario.victim_circuit)?;
    let probe = device.timing(&scenario.probe_circuit)?;
    let k = scenario.effective_probe_every();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);

    let probes = scenario.victim_repetitions.div_ceil(k) + 1;
    let mut log = JobLog {
        records: Vec::with_capacity(scenario.victim_repetitions + probes),
        truncated: 0,
    };
    let mut clock: Option<f64> = None;
    let mut push = |log: &mut JobLog, owner: Owner, circuit: &str, timing: &TimingDistribution| {
        let (duration, clipped) = device.draw(timing, &mut rng);
        log.truncated += usize::from(clipped);
        let (queued_at, started_at) = match clock {
            None => (0.0, 0.0),
            Some(end) => (end, end + device.inter_job_gap),
        };
        let ended_at = started_at + duration;
        clock = Some(ended_at);
        log.records.push(JobRecord {
            job_id: log.records.len(),
            owner,
            circuit: circuit.to_string(),
            queued_at,
            started_at,
            ended_at,
        });
    };

    push(&mut log, Owner::Attacker, &scenario.probe_circuit, probe);
    let mut remaining = scenario.victim_repetitions;
    while remaining > 0 {
        let batch = remaining.min(k);
        for _ in 0..batch {
            push(&mut log, Owner::Victim, &scenario.victim_circuit, victim);
        }
        remaining -= batch;
        push(&mut log, Owner::Attacker, &scenario.probe_circuit, probe);
    }
    Ok(log)
}

/// `ended_at − started_at` of every job owned by `owner`, in log order.
pub fn ground_truth_durations(log: &JobLog, owner: Owner) -> Vec<f64> {
    log.records
        .iter()
        .filter(|r| r.owner == owner)
        .map(JobRecord::duration)
        .collect()
}
