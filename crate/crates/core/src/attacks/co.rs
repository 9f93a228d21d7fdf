use super::uc::{achieved_power, needed};
use super::{mean_of, two_nearest, AttackError, AttackKind, AttackVerdict, VerdictStatus, INDISTINGUISHABLE};
use crate::baseline::{
    ovl_matrix, requirement_matrix, GroverVariant, OvlMatrix, Requirement, RequirementMatrix,
};
use crate::stats::PowerSpec;

use super::AMBIGUITY_EPS;

/// Verdict plus the full pairwise matrices of the catalog.
#[derive(Debug, Clone)]
pub struct CoOutcome {
    pub verdict: AttackVerdict,
    pub ovl: OvlMatrix,
    pub required: RequirementMatrix,
}

/// Two-stage Grover variant identifier: iteration count first, then the
/// oracle key within that iteration.
#[derive(Debug, Clone)]
pub struct CoIdentifier {
    catalog: Vec<GroverVariant>,
    ovl: OvlMatrix,
    required: RequirementMatrix,
    /// Distinct iteration counts, ascending, with their group mean.
    groups: Vec<(u8, f64)>,
    spec: PowerSpec,
}

fn max_req<I: Iterator<Item = Requirement>>(it: I) -> Requirement {
    it.fold(Requirement::Undefined, |acc, r| match (acc, r) {
        (Requirement::Indistinguishable, _) | (_, Requirement::Indistinguishable) => {
            Requirement::Indistinguishable
        }
        (Requirement::Undefined, r) => r,
        (a, Requirement::Undefined) => a,
        (Requirement::Samples(a), Requirement::Samples(b)) => Requirement::Samples(a.max(b)),
    })
}

impl CoIdentifier {
    pub fn new(catalog: &[GroverVariant], spec: &PowerSpec) -> Result<Self, AttackError> {
        if catalog.len() != 24 {
            return Err(AttackError::CatalogSize(catalog.len()));
        }
        let labels: Vec<String> = catalog.iter().map(|v| v.to_string()).collect();
        let models: Vec<_> = catalog.iter().map(|v| v.timing).collect();
        let ovl = ovl_matrix(&labels, &models)?;
        let required = requirement_matrix(&labels, &models, spec)?;
        let mut iters: Vec<u8> = catalog.iter().map(|v| v.iterations).collect();
        iters.sort_unstable();
        iters.dedup();
        let groups = iters
            .into_iter()
            .map(|it| {
                let members: Vec<f64> = catalog
                    .iter()
                    .filter(|v| v.iterations == it)
                    .map(|v| v.timing.mean)
                    .collect();
                (it, members.iter().sum::<f64>() / members.len() as f64)
            })
            .collect();
        Ok(Self {
            catalog: catalog.to_vec(),
            ovl,
            required,
            groups,
            spec: *spec,
        })
    }

    pub fn ovl(&self) -> &OvlMatrix {
        &self.ovl
    }

    pub fn required(&self) -> &RequirementMatrix {
        &self.required
    }

    /// Largest n needed to separate `variant` (0-based position) from every
    /// variant with a different iteration count.
    pub fn iteration_plan(&self, variant: usize) -> Requirement {
        let cat = &self.catalog;
        max_req(
            (0..cat.len())
                .filter(|&j| cat[j].iterations != cat[variant].iterations)
                .map(|j| self.required.cells[variant][j]),
        )
    }

    /// Largest n needed to separate `variant` (0-based position) from the
    /// other keys with the same iteration count.
    pub fn key_plan(&self, variant: usize) -> Requirement {
        let cat = &self.catalog;
        max_req(
            (0..cat.len())
                .filter(|&j| j != variant && cat[j].iterations == cat[variant].iterations)
                .map(|j| self.required.cells[variant][j]),
        )
    }

    /// Iteration count whose group mean is closest, `None` on a tie.
    pub fn nearest_iteration(&self, mean: f64) -> Option<u8> {
        let centers: Vec<f64> = self.groups.iter().map(|g| g.1).collect();
        let (best, second) = two_nearest(&centers, mean);
        if let Some(s) = second {
            if ((centers[s] - mean).abs() - (centers[best] - mean).abs()).abs() < AMBIGUITY_EPS {
                return None;
            }
        }
        Some(self.groups[best].0)
    }

    pub fn identify(&self, samples: &[f64]) -> Result<AttackVerdict, AttackError> {
        let mean = mean_of(samples)?;
        let n = samples.len();
        let Some(iterations) = self.nearest_iteration(mean) else {
            return Ok(AttackVerdict {
                attack: AttackKind::Co,
                label: INDISTINGUISHABLE.into(),
                status: VerdictStatus::Ambiguous,
                measurements_used: n,
                statistic: 0.0,
                planned_n: None,
                confidence: 0.0,
            });
        };
        let members: Vec<usize> = (0..self.catalog.len())
            .filter(|&i| self.catalog[i].iterations == iterations)
            .collect();
        let member_means: Vec<f64> = members.iter().map(|&i| self.catalog[i].timing.mean).collect();
        let (pick, _) = two_nearest(&member_means, mean);
        let chosen = members[pick];
        let variant = &self.catalog[chosen];

        let iter_plan = self.iteration_plan(chosen);
        let key_plan = self.key_plan(chosen);
        let meets = |r: Requirement| needed(r).is_some_and(|need| n >= need);
        let (status, label, plan) = if meets(key_plan) {
            (VerdictStatus::Identified, variant.to_string(), key_plan)
        } else if meets(iter_plan) {
            (VerdictStatus::IterationOnly, format!("iter={iterations}"), key_plan)
        } else {
            (VerdictStatus::UnderPowered, format!("iter={iterations}"), iter_plan)
        };

        let sd = variant.timing.std_dev();
        // effect size of the closest pair that the reported plan covers
        let closest = |others: &mut dyn Iterator<Item = usize>| {
            others
                .map(|j| (self.catalog[j].timing.mean - variant.timing.mean).abs())
                .fold(f64::INFINITY, f64::min)
                / sd
        };
        let d = if status == VerdictStatus::UnderPowered {
            closest(&mut (0..self.catalog.len()).filter(|&j| self.catalog[j].iterations != iterations))
        } else {
            closest(&mut members.iter().copied().filter(|&j| j != chosen))
        };
        Ok(AttackVerdict {
            attack: AttackKind::Co,
            label,
            status,
            measurements_used: n,
            statistic: (mean - variant.timing.mean) / (sd / (n as f64).sqrt()),
            planned_n: plan.samples(),
            confidence: achieved_power(d, n, &self.spec),
        })
    }
}

/// Identifies the Grover variant behind a trace and returns the catalog's
/// 24×24 OVL and required-n matrices alongside the verdict.
pub fn co_identify(
    samples: &[f64],
    catalog: &[GroverVariant],
    spec: &PowerSpec,
) -> Result<CoOutcome, AttackError> {
    if samples.is_empty() {
        return Err(AttackError::EmptyTrace);
    }
    let id = CoIdentifier::new(catalog, spec)?;
    let verdict = id.identify(samples)?;
    Ok(CoOutcome {
        verdict,
        ovl: id.ovl,
        required: id.required,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::{grover_catalog, GroverCalibration};

    #[test]
    fn exact_mean_trace_identifies_iteration() {
        let cat = grover_catalog(&GroverCalibration::default()).unwrap();
        let spec = PowerSpec::default();
        let v = &cat[GroverVariant::index_of(5, 2) - 1];
        let samples = vec![v.timing.mean; 3000];
        let out = co_identify(&samples, &cat, &spec).unwrap();
        assert_eq!(out.verdict.label, "iter=2");
        assert_eq!(out.verdict.status, VerdictStatus::IterationOnly);
        assert!(out.verdict.planned_n.unwrap() > 1e7);
        assert_eq!(out.ovl.cells[13][13], 1.0);
        assert_eq!(out.required.cells[13][13], Requirement::Undefined);
    }

    #[test]
    fn catalog_size_is_checked() {
        let cat = grover_catalog(&GroverCalibration::default()).unwrap();
        assert!(matches!(
            co_identify(&[0.2], &cat[..23], &PowerSpec::default()),
            Err(AttackError::CatalogSize(23))
        ));
    }

    #[test]
    fn long_trace_identifies_key() {
        // A widely spaced catalog so that the key plan is short.
        let cal = GroverCalibration {
            base_latency: 1.0,
            per_iteration: 1.0,
            per_oracle_spread: 0.7,
            variance: 0.01,
        };
        let cat = grover_catalog(&cal).unwrap();
        let v = &cat[GroverVariant::index_of(3, 1) - 1];
        let samples = vec![v.timing.mean; 50];
        let out = co_identify(&samples, &cat, &PowerSpec::default()).unwrap();
        assert_eq!(out.verdict.label, "key=011 iter=1");
        assert_eq!(out.verdict.status, VerdictStatus::Identified);
    }

    #[test]
    fn short_trace_is_under_powered() {
        let cat = grover_catalog(&GroverCalibration::default()).unwrap();
        let samples = vec![cat[0].timing.mean; 10];
        let out = co_identify(&samples, &cat, &PowerSpec::default()).unwrap();
        assert_eq!(out.verdict.status, VerdictStatus::UnderPowered);
        assert_eq!(out.verdict.label, "iter=1");
    }
}
