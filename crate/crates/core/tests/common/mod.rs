//! Property checks shared by the proptest suite and the acceptance run.

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use qleak::baseline::{BaselineEntry, BaselineTable};
use qleak::cloudsim::{ground_truth_durations, run_simulation, DeviceProfile, JobLog, Owner, Scenario};
use qleak::stats::{
    ovl, ovl_by_integration, required_sample_size, welch_t, PowerSpec, SampleSummary, TimingDistribution,
};
use qleak::trace::{assemble_trace, assemble_trace_known_count, extract_intervals, AttackerView};

pub type CaseResult = Result<(), TestCaseError>;

pub fn timing() -> impl Strategy<Value = TimingDistribution> {
    (0.01f64..50.0, 1e-4f64..4.0).prop_map(|(m, v)| TimingDistribution::new(m, v).unwrap())
}

pub fn summary() -> impl Strategy<Value = SampleSummary> {
    (2usize..5000, -100.0f64..100.0, 1e-3f64..50.0).prop_map(|(n, m, v)| SampleSummary::new(n, m, v).unwrap())
}

pub fn check_ovl(p: TimingDistribution, q: TimingDistribution) -> CaseResult {
    let pq = ovl(&p, &q);
    prop_assert!((0.0..=1.0).contains(&pq), "ovl out of range: {pq}");
    prop_assert!((pq - ovl(&q, &p)).abs() <= 1e-12, "not symmetric");
    prop_assert!((ovl(&p, &p) - 1.0).abs() <= 1e-12, "ovl(p, p) != 1");
    let numeric = ovl_by_integration(&p, &q);
    prop_assert!((pq - numeric).abs() <= 1e-6, "closed form {pq} vs integral {numeric}");
    Ok(())
}

pub fn check_welch(a: SampleSummary, b: SampleSummary, shift: f64) -> CaseResult {
    let ab = welch_t(&a, &b).unwrap();
    let ba = welch_t(&b, &a).unwrap();
    prop_assert!((ab + ba).abs() <= 1e-12 * ab.abs().max(1.0), "t(a,b) = {ab}, t(b,a) = {ba}");
    let a2 = SampleSummary::new(a.n, a.mean + shift, a.variance).unwrap();
    let b2 = SampleSummary::new(b.n, b.mean + shift, b.variance).unwrap();
    let shifted = welch_t(&a2, &b2).unwrap();
    prop_assert!(
        (shifted - ab).abs() <= 1e-8 * ab.abs().max(1.0),
        "shift changed t: {ab} -> {shifted}"
    );
    Ok(())
}

/// Larger effects need fewer samples, and halving a small effect
/// quadruples n.
pub fn check_sample_size(d: f64, factor: f64) -> CaseResult {
    let spec = PowerSpec::default();
    let n = required_sample_size(d, &spec).unwrap();
    let n_bigger = required_sample_size(d * factor, &spec).unwrap();
    prop_assert!(n_bigger <= n, "n({}) = {n_bigger} > n({d}) = {n}", d * factor);
    if d <= 0.3 {
        let n_half = required_sample_size(d / 2.0, &spec).unwrap();
        let ratio = n_half / n;
        prop_assert!((ratio - 4.0).abs() <= 0.04, "n(d/2)/n(d) = {ratio} at d = {d}");
    }
    Ok(())
}

pub fn scenario(victim: TimingDistribution, probe: TimingDistribution, k: usize, gap: f64, reps: usize, seed: u64) -> Scenario {
    Scenario {
        device: DeviceProfile::new("dev")
            .with_circuit("victim", victim)
            .with_circuit("probe", probe)
            .with_gap(gap),
        victim_circuit: "victim".into(),
        victim_repetitions: reps,
        probe_circuit: "probe".into(),
        probe_every: k,
        seed,
    }
}

/// With one run per interval and no gap the attacker recovers the exact
/// durations.
pub fn check_trace_identity(victim: TimingDistribution, reps: usize, seed: u64) -> CaseResult {
    let probe = TimingDistribution::new(0.3, 0.001).unwrap();
    let log = run_simulation(&scenario(victim, probe, 1, 0.0, reps, seed)).unwrap();
    let truth = ground_truth_durations(&log, Owner::Victim);
    let view = AttackerView::from_log(&log).unwrap();
    prop_assert_eq!(&extract_intervals(&view).unwrap(), &truth);
    let known = assemble_trace_known_count(&view, 1, 0.0).unwrap();
    prop_assert_eq!(&known.durations, &truth);
    // With counting, every interval counted as one run is still exact.
    let counted = assemble_trace(&view, victim.mean, 0.0).unwrap();
    prop_assert_eq!(counted.effective_len(), truth.len());
    for ((&c, s), t) in counted.inferred_counts.iter().zip(counted.samples()).zip(&truth) {
        if c == 1 {
            prop_assert_eq!(s, t);
        }
    }
    Ok(())
}

pub fn check_simulation_determinism(victim: TimingDistribution, k: usize, gap: f64, seed: u64) -> CaseResult {
    let probe = TimingDistribution::new(0.3, 0.001).unwrap();
    let sc = scenario(victim, probe, k, gap, 50, seed);
    prop_assert_eq!(run_simulation(&sc).unwrap(), run_simulation(&sc).unwrap());
    Ok(())
}

pub fn check_joblog_round_trip(victim: TimingDistribution, k: usize, gap: f64, seed: u64) -> CaseResult {
    let probe = TimingDistribution::new(0.3, 0.001).unwrap();
    let log = run_simulation(&scenario(victim, probe, k, gap, 30, seed)).unwrap();
    let mut buf = Vec::new();
    log.write_csv(&mut buf).unwrap();
    let back = JobLog::read_csv(buf.as_slice()).unwrap();
    prop_assert_eq!(back.records, log.records);
    Ok(())
}

pub fn table_entries() -> impl Strategy<Value = Vec<BaselineEntry>> {
    prop::collection::vec(
        (
            1e-3f64..200.0,
            1e-3f64..200.0,
            prop::option::of(1.0f64..1e6),
            prop::option::of(1.0f64..1e6),
        ),
        2..12,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (s, q, rs, rq))| BaselineEntry {
                name: format!("circuit, {i}"),
                sim_latency: s,
                qc_latency: q,
                sim_required: rs,
                qc_required: rq,
            })
            .collect()
    })
}

pub fn check_table_round_trip(entries: Vec<BaselineEntry>) -> CaseResult {
    let table = BaselineTable::new(entries).unwrap();
    let mut buf = Vec::new();
    table.to_writer(&mut buf).unwrap();
    let back = BaselineTable::from_reader(buf.as_slice()).unwrap();
    prop_assert_eq!(back, table);
    Ok(())
}

/// Runs every property with `cases` random cases each; returns the name and
/// outcome of each suite.
pub fn run_all(cases: u32) -> Vec<(&'static str, Result<(), String>)> {
    fn go<S: Strategy>(
        cases: u32,
        strategy: S,
        test: impl Fn(S::Value) -> CaseResult,
    ) -> Result<(), String> {
        let mut runner = TestRunner::new(Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        });
        runner.run(&strategy, test).map_err(|e| e.to_string())
    }
    vec![
        ("ovl symmetry/identity/integration", go(cases, (timing(), timing()), |(p, q)| check_ovl(p, q))),
        (
            "welch_t antisymmetry/shift",
            go(cases, (summary(), summary(), -1e3f64..1e3), |(a, b, s)| check_welch(a, b, s)),
        ),
        (
            "required n monotone/quarter-scaling",
            go(cases, (0.005f64..3.0, 1.0f64..4.0), |(d, f)| check_sample_size(d, f)),
        ),
        (
            "trace identity k=1 gap=0",
            go(cases, (timing(), 1usize..200, any::<u64>()), |(v, r, s)| check_trace_identity(v, r, s)),
        ),
        (
            "simulation determinism",
            go(cases, (timing(), 1usize..6, 0.0f64..1.0, any::<u64>()), |(v, k, g, s)| {
                check_simulation_determinism(v, k, g, s)
            }),
        ),
        (
            "job log csv round trip",
            go(cases, (timing(), 1usize..6, 0.0f64..1.0, any::<u64>()), |(v, k, g, s)| {
                check_joblog_round_trip(v, k, g, s)
            }),
        ),
        ("baseline csv round trip", go(cases, table_entries(), check_table_round_trip)),
    ]
}
