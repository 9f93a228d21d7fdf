//! Seeded Monte-Carlo drivers for the attacks. Run `r` of a batch always
//! uses ChaCha stream `r` of the batch seed, so results do not depend on how
//! rayon splits the work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{null_distinguishability, qp_fingerprint, AttackError, CoIdentifier, UcClassifier};
use crate::cloudsim::{run_simulation, DeviceProfile, Scenario};
use crate::stats::TimingDistribution;
use crate::trace::{assemble_trace, AttackerView};

/// Per-run RNG factory.
#[derive(Debug, Clone, Copy)]
pub struct SeedStream(pub u64);

impl SeedStream {
    pub fn rng(self, run: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(run as u64);
        rng
    }
}

fn fraction<F: Fn(usize) -> Result<bool, AttackError> + Sync>(
    runs: usize,
    f: F,
) -> Result<f64, AttackError> {
    if runs == 0 {
        return Err(AttackError::TooShort { needed: 1, got: 0 });
    }
    let hits = (0..runs)
        .into_par_iter()
        .map(|r| f(r).map(usize::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(hits as f64 / runs as f64)
}

/// Share of `runs` traces of length `n` drawn from `source` that the
/// classifier labels as circuit `truth`.
pub fn uc_accuracy(
    classifier: &UcClassifier,
    source: &TimingDistribution,
    truth: usize,
    n: usize,
    runs: usize,
    seed: u64,
) -> Result<f64, AttackError> {
    let seeds = SeedStream(seed);
    fraction(runs, |r| {
        let mut rng = seeds.rng(r);
        let samples = source.sample_n(&mut rng, n);
        let mean = super::mean_of(&samples)?;
        Ok(classifier.nearest(mean) == Some(truth))
    })
}

/// Share of traces from `source` whose iteration count is recovered.
pub fn co_iteration_accuracy(
    identifier: &CoIdentifier,
    source: &TimingDistribution,
    iterations: u8,
    n: usize,
    runs: usize,
    seed: u64,
) -> Result<f64, AttackError> {
    let seeds = SeedStream(seed);
    fraction(runs, |r| {
        let mut rng = seeds.rng(r);
        let samples = source.sample_n(&mut rng, n);
        let mean = super::mean_of(&samples)?;
        Ok(identifier.nearest_iteration(mean) == Some(iterations))
    })
}

/// Share of same-model trace pairs that the DoM null check calls
/// distinguishable.
pub fn null_false_positive_rate(
    model: &TimingDistribution,
    n: usize,
    runs: usize,
    confidence: f64,
    seed: u64,
) -> Result<f64, AttackError> {
    let seeds = SeedStream(seed);
    fraction(runs, |r| {
        let mut rng = seeds.rng(r);
        let a = model.sample_n(&mut rng, n);
        let b = model.sample_n(&mut rng, n);
        Ok(null_distinguishability(&a, &b, confidence)?.distinguishable)
    })
}

/// Runs the scenario end to end (simulation, attacker view, trace) once per
/// seed `first_seed..first_seed + runs` and fingerprints the victim against
/// `devices`. Returns the share of runs in which every wrong device was
/// rejected with a first band crossing at or before `max_n`, and the share
/// labelled with the scenario's own device.
pub fn qp_crossing_rate(
    scenario: &Scenario,
    devices: &[DeviceProfile],
    avg_victim: f64,
    max_n: usize,
    confidence: f64,
    runs: usize,
    first_seed: u64,
) -> Result<(f64, f64), AttackError> {
    let outcomes = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut sc = scenario.clone();
            sc.seed = first_seed + r as u64;
            let log = run_simulation(&sc)?;
            let view = AttackerView::from_log(&log)?;
            let trace = assemble_trace(&view, avg_victim, sc.device.inter_job_gap)?;
            let samples = &trace.samples()[..trace.effective_len().min(max_n)];
            let out = qp_fingerprint(samples, devices, &sc.victim_circuit, confidence)?;
            let crossed = out
                .devices
                .iter()
                .filter(|d| d.0 != sc.device.name)
                .all(|d| d.2.is_some_and(|c| c <= max_n));
            Ok((crossed, out.verdict.label == sc.device.name))
        })
        .collect::<Result<Vec<_>, AttackError>>()?;
    let k = outcomes.len().max(1) as f64;
    Ok((
        outcomes.iter().filter(|o| o.0).count() as f64 / k,
        outcomes.iter().filter(|o| o.1).count() as f64 / k,
    ))
}
