//! Timing defenses as transforms on device profiles, and an evaluator that
//! measures how much each one raises the attacker's measurement budget.
//!
//! All transforms touch timing only; the circuits' functional output is not
//! modelled, so it is unchanged by construction.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attacks::{
    co_iteration_accuracy, qp_fingerprint, AttackError, AttackKind, CoIdentifier, UcClassifier,
};
use crate::baseline::{
    format_sig, nearest_neighbor_requirement, pair_requirement, Backend, BaselineError,
    BaselineTable, GroverVariant, Requirement,
};
use crate::cloudsim::{run_simulation, DeviceProfile, Scenario, SimError};
use crate::stats::{PowerSpec, TimingDistribution};
use crate::trace::{assemble_trace, assemble_trace_known_count, AttackerView};

#[derive(Debug, Error)]
pub enum MitigationError {
    #[error("invalid mitigation: {0}")]
    Invalid(String),
    #[error("attack {0} cannot be evaluated against mitigations")]
    Unsupported(AttackKind),
    #[error("evaluation context is missing {0}")]
    MissingContext(&'static str),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl From<crate::stats::StatsError> for MitigationError {
    fn from(e: crate::stats::StatsError) -> Self {
        MitigationError::Attack(e.into())
    }
}

impl From<crate::trace::TraceError> for MitigationError {
    fn from(e: crate::trace::TraceError) -> Self {
        MitigationError::Attack(e.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Mitigation {
    /// Compile each job to one of several placements whose latencies differ
    /// by `offsets` (seconds). Offsets are centered on their mean, so the
    /// average latency is kept and a single placement changes nothing.
    CompileRandomness { offsets: Vec<f64> },
    /// The scheduler runs victim jobs in batches of at least `batch`.
    SchedulerBatching { batch: usize },
    /// Pad `circuit` (every circuit when absent) with gates worth `offset`
    /// seconds.
    CircuitPadding {
        offset: f64,
        #[serde(default)]
        circuit: Option<String>,
    },
    /// Add zero-mean noise of `added_variance` seconds² to reported times.
    TimerNoise { added_variance: f64 },
}

impl fmt::Display for Mitigation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mitigation::CompileRandomness { offsets } => {
                write!(f, "compile-randomness({} placements)", offsets.len())
            }
            Mitigation::SchedulerBatching { batch } => write!(f, "scheduler-batching({batch})"),
            Mitigation::CircuitPadding { offset, circuit } => match circuit {
                Some(c) => write!(f, "circuit-padding({offset} s on {c})"),
                None => write!(f, "circuit-padding({offset} s)"),
            },
            Mitigation::TimerNoise { added_variance } => write!(f, "timer-noise({added_variance} s²)"),
        }
    }
}

fn centered(offsets: &[f64]) -> Vec<f64> {
    let mean = offsets.iter().sum::<f64>() / offsets.len() as f64;
    offsets.iter().map(|o| o - mean).collect()
}

impl Mitigation {
    pub fn validate(&self) -> Result<(), MitigationError> {
        let bad = |msg: String| Err(MitigationError::Invalid(msg));
        match self {
            Mitigation::CompileRandomness { offsets } => {
                if offsets.is_empty() {
                    return bad("compile-randomness needs at least one placement".into());
                }
                if offsets.iter().any(|o| !o.is_finite()) {
                    return bad("placement offsets must be finite".into());
                }
            }
            Mitigation::SchedulerBatching { batch } => {
                if *batch == 0 {
                    return bad("batch size must be at least 1".into());
                }
            }
            Mitigation::CircuitPadding { offset, .. } => {
                if !(*offset >= 0.0) || !offset.is_finite() {
                    return bad(format!("padding must be non-negative, got {offset}"));
                }
            }
            Mitigation::TimerNoise { added_variance } => {
                if !(*added_variance >= 0.0) || !added_variance.is_finite() {
                    return bad(format!("added variance must be non-negative, got {added_variance}"));
                }
            }
        }
        Ok(())
    }

    /// Per-execution timing of `circuit` after the transform, as a Gaussian
    /// with the mixture's mean and variance.
    pub fn effective_model(&self, circuit: &str, model: &TimingDistribution) -> TimingDistribution {
        let mut out = *model;
        match self {
            Mitigation::CompileRandomness { offsets } if !offsets.is_empty() => {
                let c = centered(offsets);
                out.variance += c.iter().map(|o| o * o).sum::<f64>() / c.len() as f64;
            }
            Mitigation::CircuitPadding { offset, circuit: target } => {
                if target.as_deref().is_none_or(|t| t == circuit) {
                    out.mean += offset;
                }
            }
            Mitigation::TimerNoise { added_variance } => out.variance += added_variance,
            _ => {}
        }
        out
    }
}

/// Returns a transformed copy of `profile`; the input is left untouched.
pub fn apply(m: &Mitigation, profile: &DeviceProfile) -> Result<DeviceProfile, MitigationError> {
    m.validate()?;
    let mut out = profile.clone();
    match m {
        Mitigation::CompileRandomness { offsets } => {
            let c = centered(offsets);
            out.placement_offsets = if out.placement_offsets.is_empty() {
                c
            } else {
                out.placement_offsets
                    .iter()
                    .flat_map(|a| c.iter().map(move |b| a + b))
                    .collect()
            };
            if out.placement_offsets.iter().all(|&o| o == 0.0) {
                out.placement_offsets.clear();
            }
        }
        Mitigation::SchedulerBatching { batch } => out.batching = out.batching.max(*batch),
        Mitigation::CircuitPadding { offset, circuit } => {
            for (name, t) in out.circuit_timings.iter_mut() {
                if circuit.as_deref().is_none_or(|c| c == name) {
                    t.mean += offset;
                }
            }
        }
        Mitigation::TimerNoise { added_variance } => {
            for t in out.circuit_timings.values_mut() {
                t.variance += added_variance;
            }
        }
    }
    Ok(out)
}

/// Everything the evaluator needs besides the mitigation itself.
#[derive(Debug, Clone)]
pub struct EvalContext {
    /// Victim workload; its device is the unmitigated platform.
    pub scenario: Scenario,
    /// Attacker's reference table (UC).
    pub table: Option<BaselineTable>,
    pub backend: Backend,
    /// Candidate devices, the scenario's own included (QP).
    pub devices: Vec<DeviceProfile>,
    /// Grover catalog and the victim's 1-based variant index (CO).
    pub catalog: Vec<GroverVariant>,
    pub victim_variant: usize,
    /// Mean victim duration the attacker assumes when counting runs.
    pub avg_victim: f64,
    /// Runs per probe interval when the attacker assumes a fixed count
    /// instead of counting.
    pub runs_per_interval: Option<usize>,
    pub runs: usize,
    pub confidence: f64,
}

/// Measurement inflation caused by one mitigation against one attack.
#[derive(Debug, Clone, PartialEq)]
pub struct InflationReport {
    pub attack: AttackKind,
    pub mitigation: String,
    /// Victim executions the attacker needs without the mitigation.
    pub baseline_n: f64,
    /// ... and with it.
    pub mitigated_n: f64,
    pub ratio: f64,
    /// Success rate at `baseline_n`, without and with the mitigation.
    pub baseline_accuracy: f64,
    pub mitigated_accuracy: f64,
}

impl InflationReport {
    pub const CSV_HEADER: [&'static str; 7] = [
        "attack",
        "mitigation",
        "baseline_n",
        "mitigated_n",
        "ratio",
        "baseline_accuracy",
        "mitigated_accuracy",
    ];

    pub fn csv_record(&self) -> [String; 7] {
        [
            self.attack.to_string(),
            self.mitigation.clone(),
            format_sig(self.baseline_n, 9),
            format_sig(self.mitigated_n, 9),
            format_sig(self.ratio, 9),
            format_sig(self.baseline_accuracy, 9),
            format_sig(self.mitigated_accuracy, 9),
        ]
    }
}

pub fn write_reports<W: Write>(writer: W, reports: &[InflationReport]) -> Result<(), MitigationError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(InflationReport::CSV_HEADER)?;
    for r in reports {
        w.write_record(r.csv_record())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn samples_of(req: Requirement) -> f64 {
    req.samples().unwrap_or(f64::INFINITY)
}

/// Share of simulated victim traces, `budget` runs each, for which `check`
/// accepts the reconstructed samples.
fn trace_success<F>(
    ctx: &EvalContext,
    device: &DeviceProfile,
    budget: usize,
    check: F,
) -> Result<f64, MitigationError>
where
    F: Fn(&[f64]) -> Result<bool, MitigationError> + Sync,
{
    use rayon::prelude::*;
    let (scenario, runs) = (&ctx.scenario, ctx.runs);
    if runs == 0 {
        return Err(MitigationError::Invalid("at least one run is required".into()));
    }
    let hits = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut sc = scenario.clone();
            sc.device = device.clone();
            sc.victim_repetitions = budget.max(1);
            sc.seed = scenario.seed.wrapping_add(r as u64);
            let log = run_simulation(&sc)?;
            let view = AttackerView::from_log(&log)?;
            let gap = sc.device.inter_job_gap;
            let trace = match ctx.runs_per_interval {
                Some(k) => assemble_trace_known_count(&view, k, gap)?,
                None => assemble_trace(&view, ctx.avg_victim, gap)?,
            };
            if trace.is_empty() {
                return Ok(0usize);
            }
            check(trace.samples()).map(usize::from)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(hits as f64 / runs as f64)
}

/// Runs the attack harness with and without the mitigation.
///
/// The required-n figures are closed-form on the per-execution models; the
/// accuracies are Monte-Carlo over `ctx.runs` simulated traces (UC, QP) or
/// model draws (CO) at the unmitigated budget. Deterministic for a fixed
/// scenario seed.
pub fn evaluate(
    m: &Mitigation,
    ctx: &EvalContext,
    attack: AttackKind,
    spec: &PowerSpec,
) -> Result<InflationReport, MitigationError> {
    m.validate()?;
    let mitigated_device = apply(m, &ctx.scenario.device)?;
    let victim = ctx.scenario.victim_circuit.as_str();
    let (baseline_n, mitigated_n, baseline_accuracy, mitigated_accuracy) = match attack {
        AttackKind::Uc => {
            let table = ctx.table.as_ref().ok_or(MitigationError::MissingContext("a baseline table"))?;
            let vi = table.find(victim)?;
            let (_, req) = nearest_neighbor_requirement(table, vi, ctx.backend, spec)?;
            let n0 = samples_of(req);
            let eff: Vec<TimingDistribution> = (0..table.len())
                .map(|i| m.effective_model(&table.entries[i].name, &table.model(i, ctx.backend)))
                .collect();
            let nb = (0..eff.len())
                .filter(|&j| j != vi)
                .min_by(|&a, &b| {
                    (eff[a].mean - eff[vi].mean)
                        .abs()
                        .total_cmp(&(eff[b].mean - eff[vi].mean).abs())
                })
                .ok_or(MitigationError::MissingContext("a second table row"))?;
            let n1 = samples_of(pair_requirement(&eff[vi], &eff[nb], spec)?);
            let classifier = UcClassifier::new(table, ctx.backend, spec)?;
            let truth = table.entries[vi].name.clone();
            let budget = n0.ceil() as usize;
            let check = |s: &[f64]| -> Result<bool, MitigationError> {
                Ok(classifier.classify(s)?.label == truth)
            };
            let a0 = trace_success(ctx, &ctx.scenario.device, budget, check)?;
            let a1 = trace_success(ctx, &mitigated_device, budget, check)?;
            (n0, n1, a0, a1)
        }
        AttackKind::Co => {
            if ctx.catalog.is_empty() {
                return Err(MitigationError::MissingContext("a Grover catalog"));
            }
            let idx = ctx.victim_variant.checked_sub(1).filter(|&i| i < ctx.catalog.len());
            let vi = idx.ok_or(MitigationError::MissingContext("a valid victim variant index"))?;
            let id = CoIdentifier::new(&ctx.catalog, spec)?;
            let n0 = samples_of(id.iteration_plan(vi));
            let label = |v: &GroverVariant| v.to_string();
            let mitigated: Vec<GroverVariant> = ctx
                .catalog
                .iter()
                .map(|v| GroverVariant {
                    timing: m.effective_model(&label(v), &v.timing),
                    ..*v
                })
                .collect();
            let id1 = CoIdentifier::new(&mitigated, spec)?;
            let n1 = samples_of(id1.iteration_plan(vi));
            let budget = n0.ceil() as usize;
            let v = &ctx.catalog[vi];
            let seed = ctx.scenario.seed;
            let a0 = co_iteration_accuracy(&id, &v.timing, v.iterations, budget, ctx.runs, seed)?;
            let a1 = co_iteration_accuracy(&id, &mitigated[vi].timing, v.iterations, budget, ctx.runs, seed)?;
            (n0, n1, a0, a1)
        }
        AttackKind::Qp => {
            if ctx.devices.len() < 2 {
                return Err(MitigationError::MissingContext("two or more reference devices"));
            }
            let own = ctx.scenario.device.timing(victim)?;
            let rivals: Vec<&TimingDistribution> = ctx
                .devices
                .iter()
                .filter(|d| d.name != ctx.scenario.device.name)
                .map(|d| d.timing(victim))
                .collect::<Result<_, _>>()?;
            let plan = |model: &TimingDistribution| -> Result<f64, MitigationError> {
                let mut worst: f64 = 1.0;
                for r in &rivals {
                    worst = worst.max(samples_of(pair_requirement(model, r, spec)?));
                }
                Ok(worst)
            };
            let n0 = plan(own)?;
            let n1 = plan(&m.effective_model(victim, own))?;
            let budget = (n0.ceil() as usize).max(2);
            let name = ctx.scenario.device.name.clone();
            let check = |s: &[f64]| -> Result<bool, MitigationError> {
                if s.len() < 2 {
                    return Ok(false);
                }
                Ok(qp_fingerprint(s, &ctx.devices, victim, ctx.confidence)?.verdict.label == name)
            };
            let a0 = trace_success(ctx, &ctx.scenario.device, budget, check)?;
            let a1 = trace_success(ctx, &mitigated_device, budget, check)?;
            (n0, n1, a0, a1)
        }
        other => return Err(MitigationError::Unsupported(other)),
    };
    Ok(InflationReport {
        attack,
        mitigation: m.to_string(),
        baseline_n,
        mitigated_n,
        ratio: mitigated_n / baseline_n,
        baseline_accuracy,
        mitigated_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> DeviceProfile {
        DeviceProfile::new("dev")
            .with_circuit("a", TimingDistribution::new(2.0, 0.3).unwrap())
            .with_circuit("b", TimingDistribution::new(3.0, 0.3).unwrap())
    }

    #[test]
    fn identities() {
        let p = profile();
        let zero = Mitigation::TimerNoise { added_variance: 0.0 };
        assert_eq!(apply(&zero, &p).unwrap(), p);
        let single = Mitigation::CompileRandomness { offsets: vec![0.4] };
        assert_eq!(apply(&single, &p).unwrap(), p);
    }

    #[test]
    fn apply_is_pure_and_noise_composes() {
        let p = profile();
        let m = Mitigation::TimerNoise { added_variance: 0.1 };
        let once = apply(&m, &p).unwrap();
        let twice = apply(&m, &once).unwrap();
        assert_eq!(p.circuit_timings["a"].variance, 0.3);
        assert!((twice.circuit_timings["a"].variance - 0.5).abs() < 1e-15);
    }

    #[test]
    fn padding_targets_one_circuit() {
        let p = profile();
        let m = Mitigation::CircuitPadding {
            offset: 0.5,
            circuit: Some("a".into()),
        };
        let q = apply(&m, &p).unwrap();
        assert_eq!(q.circuit_timings["a"].mean, 2.5);
        assert_eq!(q.circuit_timings["b"].mean, 3.0);
    }

    #[test]
    fn batching_and_offsets() {
        let p = profile();
        let q = apply(&Mitigation::SchedulerBatching { batch: 4 }, &p).unwrap();
        assert_eq!(q.batching, 4);
        let r = apply(&Mitigation::CompileRandomness { offsets: vec![1.0, 2.0, 3.0] }, &p).unwrap();
        assert_eq!(r.placement_offsets, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn invalid_parameters() {
        let p = profile();
        assert!(apply(&Mitigation::CompileRandomness { offsets: vec![] }, &p).is_err());
        assert!(apply(&Mitigation::SchedulerBatching { batch: 0 }, &p).is_err());
        assert!(apply(&Mitigation::TimerNoise { added_variance: -1.0 }, &p).is_err());
        assert!(apply(
            &Mitigation::CircuitPadding {
                offset: f64::NAN,
                circuit: None
            },
            &p
        )
        .is_err());
    }

    fn ghz_context(runs: usize) -> EvalContext {
        let table = BaselineTable::bundled();
        let ghz = table.find("GHZ").unwrap();
        let device = DeviceProfile::new("hw")
            .with_circuit("GHZ", table.model(ghz, Backend::Hardware))
            .with_circuit("probe", TimingDistribution::new(0.5, 0.01).unwrap());
        EvalContext {
            scenario: Scenario {
                device,
                victim_circuit: "GHZ".into(),
                victim_repetitions: 1,
                probe_circuit: "probe".into(),
                probe_every: 1,
                seed: 11,
            },
            table: Some(table.clone()),
            backend: Backend::Hardware,
            devices: vec![],
            catalog: vec![],
            victim_variant: 0,
            avg_victim: table.entries[ghz].qc_latency,
            runs_per_interval: None,
            runs,
            confidence: 0.95,
        }
    }

    #[test]
    fn timer_noise_at_model_variance_doubles_n() {
        let ctx = ghz_context(20);
        let m = Mitigation::TimerNoise { added_variance: 0.3 };
        let r = evaluate(&m, &ctx, AttackKind::Uc, &PowerSpec::default()).unwrap();
        assert!((r.ratio - 2.0).abs() < 0.1, "{r:?}");
        assert_eq!(r.attack, AttackKind::Uc);
    }

    #[test]
    fn wide_compile_randomness_costs_accuracy() {
        let ctx = ghz_context(200);
        let m = Mitigation::CompileRandomness { offsets: vec![-0.6, 0.6] };
        let r = evaluate(&m, &ctx, AttackKind::Uc, &PowerSpec::default()).unwrap();
        assert!(r.mitigated_accuracy < 1.0, "{r:?}");
        assert!(r.mitigated_accuracy < r.baseline_accuracy, "{r:?}");
        assert!(r.ratio > 2.0);
        let again = evaluate(&m, &ctx, AttackKind::Uc, &PowerSpec::default()).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn missing_context_is_reported() {
        let ctx = ghz_context(5);
        let m = Mitigation::TimerNoise { added_variance: 0.1 };
        assert!(evaluate(&m, &ctx, AttackKind::Co, &PowerSpec::default()).is_err());
        assert!(evaluate(&m, &ctx, AttackKind::Qp, &PowerSpec::default()).is_err());
        assert!(evaluate(&m, &ctx, AttackKind::Ca, &PowerSpec::default()).is_err());
    }

    #[test]
    fn serde_tagging() {
        let m: Mitigation = toml::from_str("kind = \"timer-noise\"\nadded_variance = 0.3\n").unwrap();
        assert_eq!(m, Mitigation::TimerNoise { added_variance: 0.3 });
    }
}
