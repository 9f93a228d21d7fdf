use super::{
    mean_of, two_nearest, AttackError, AttackKind, AttackVerdict, VerdictStatus, INDISTINGUISHABLE,
};
use crate::baseline::{nearest_neighbor_requirement, Backend, BaselineTable, Requirement};
use crate::stats::{two_sample_power, PowerSpec, TimingDistribution};

/// Two candidate means closer than this (seconds) to the trace mean than
/// each other make the verdict ambiguous.
pub const AMBIGUITY_EPS: f64 = 1e-12;

/// Nearest-mean circuit classifier for one backend column, with the
/// per-circuit measurement plan computed once up front.
#[derive(Debug, Clone)]
pub struct UcClassifier {
    names: Vec<String>,
    means: Vec<f64>,
    variance: f64,
    plans: Vec<(usize, Requirement)>,
    spec: PowerSpec,
}

/// Trace length needed to meet a plan; `None` if no length suffices.
pub(crate) fn needed(req: Requirement) -> Option<usize> {
    match req {
        Requirement::Samples(n) => Some((n - 1e-9).ceil().max(1.0) as usize),
        Requirement::Undefined => Some(1),
        Requirement::Indistinguishable => None,
    }
}

/// Power of the planned pair at the trace length (at least 2 per group).
pub(crate) fn achieved_power(d: f64, n: usize, spec: &PowerSpec) -> f64 {
    if !(d > 0.0) {
        return spec.alpha;
    }
    two_sample_power(d, n.max(2) as f64, spec.alpha).unwrap_or(f64::NAN)
}

impl UcClassifier {
    pub fn new(table: &BaselineTable, backend: Backend, spec: &PowerSpec) -> Result<Self, AttackError> {
        let plans = (0..table.len())
            .map(|i| nearest_neighbor_requirement(table, i, backend, spec))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            names: table.names(),
            means: table.means(backend),
            variance: table.variance(backend),
            plans,
            spec: *spec,
        })
    }

    /// Planned trace length for circuit `index` (nearest-neighbour n).
    pub fn plan(&self, index: usize) -> Requirement {
        self.plans[index].1
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Index of the nearest-mean circuit, or `None` on a tie.
    pub fn nearest(&self, mean: f64) -> Option<usize> {
        let (best, second) = two_nearest(&self.means, mean);
        match second {
            Some(s) if ((self.means[s] - mean).abs() - (self.means[best] - mean).abs()).abs() < AMBIGUITY_EPS => None,
            _ => Some(best),
        }
    }

    pub fn classify(&self, samples: &[f64]) -> Result<AttackVerdict, AttackError> {
        let mean = mean_of(samples)?;
        let n = samples.len();
        let Some(best) = self.nearest(mean) else {
            return Ok(AttackVerdict {
                attack: AttackKind::Uc,
                label: INDISTINGUISHABLE.into(),
                status: VerdictStatus::Ambiguous,
                measurements_used: n,
                statistic: 0.0,
                planned_n: None,
                confidence: 0.0,
            });
        };
        let (neighbor, plan) = self.plans[best];
        let status = match needed(plan) {
            Some(need) if n >= need => VerdictStatus::Identified,
            _ => VerdictStatus::UnderPowered,
        };
        let sigma = self.variance.sqrt();
        let d = (self.means[best] - self.means[neighbor]).abs() / sigma;
        Ok(AttackVerdict {
            attack: AttackKind::Uc,
            label: self.names[best].clone(),
            status,
            measurements_used: n,
            statistic: (mean - self.means[best]) / (sigma / (n as f64).sqrt()),
            planned_n: plan.samples(),
            confidence: achieved_power(d, n, &self.spec),
        })
    }
}

/// Classifies a trace against one backend column of the table.
///
/// The plan is the nearest-neighbour requirement of the winning circuit; a
/// shorter trace still gets that label but is flagged under-powered.
pub fn uc_classify(
    samples: &[f64],
    table: &BaselineTable,
    backend: Backend,
    spec: &PowerSpec,
) -> Result<AttackVerdict, AttackError> {
    if samples.is_empty() {
        return Err(AttackError::EmptyTrace);
    }
    UcClassifier::new(table, backend, spec)?.classify(samples)
}

/// Decides whether a trace came from the simulator or the hardware column,
/// by nearest mean over all circuits of both columns.
///
/// The statistic is the t-score of the trace mean against the closest model
/// of the losing column.
pub fn detect_backend(
    samples: &[f64],
    table: &BaselineTable,
    spec: &PowerSpec,
) -> Result<AttackVerdict, AttackError> {
    let mean = mean_of(samples)?;
    let n = samples.len();
    let models: Vec<(Backend, TimingDistribution)> = Backend::ALL
        .iter()
        .flat_map(|&b| (0..table.len()).map(move |i| (b, table.model(i, b))))
        .collect();
    let means: Vec<f64> = models.iter().map(|(_, m)| m.mean).collect();
    let (best, second) = two_nearest(&means, mean);
    if let Some(s) = second {
        if ((means[s] - mean).abs() - (means[best] - mean).abs()).abs() < AMBIGUITY_EPS {
            return Ok(AttackVerdict {
                attack: AttackKind::Uc,
                label: INDISTINGUISHABLE.into(),
                status: VerdictStatus::Ambiguous,
                measurements_used: n,
                statistic: 0.0,
                planned_n: None,
                confidence: 0.0,
            });
        }
    }
    let (backend, model) = models[best];
    let (_, rival) = models
        .iter()
        .filter(|(b, _)| *b != backend)
        .min_by(|a, b| (a.1.mean - model.mean).abs().total_cmp(&(b.1.mean - model.mean).abs()))
        .copied()
        .expect("both columns are populated");
    let plan = crate::baseline::pair_requirement(&model, &rival, spec)?;
    let status = match needed(plan) {
        Some(need) if n >= need => VerdictStatus::Identified,
        _ => VerdictStatus::UnderPowered,
    };
    let d = (model.mean - rival.mean).abs() / (0.5 * (model.variance + rival.variance)).sqrt();
    Ok(AttackVerdict {
        attack: AttackKind::Uc,
        label: backend.to_string(),
        status,
        measurements_used: n,
        statistic: (mean - rival.mean) / (rival.variance / n as f64).sqrt(),
        planned_n: plan.samples(),
        confidence: achieved_power(d, n, spec),
    })
}
