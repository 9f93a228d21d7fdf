use super::{SampleSummary, StatsError};

fn require_two(s: &SampleSummary) -> Result<(), StatsError> {
    if s.n < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: s.n });
    }
    Ok(())
}

/// Welch two-sample t statistic,
/// t = (mean_a − mean_b) / sqrt(var_a/n_a + var_b/n_b).
///
/// A zero standard error with distinct means yields ±∞ (infinite
/// separation); zero standard error with equal means is
/// [`StatsError::Indeterminate`].
pub fn welch_t(a: &SampleSummary, b: &SampleSummary) -> Result<f64, StatsError> {
    require_two(a)?;
    require_two(b)?;
    let diff = a.mean - b.mean;
    let se2 = a.variance / a.n as f64 + b.variance / b.n as f64;
    if se2 == 0.0 {
        if diff == 0.0 {
            return Err(StatsError::Indeterminate);
        }
        return Ok(diff.signum() * f64::INFINITY);
    }
    Ok(diff / se2.sqrt())
}

/// Welch–Satterthwaite degrees of freedom.
pub fn welch_df(a: &SampleSummary, b: &SampleSummary) -> Result<f64, StatsError> {
    require_two(a)?;
    require_two(b)?;
    let va = a.variance / a.n as f64;
    let vb = b.variance / b.n as f64;
    let num = (va + vb) * (va + vb);
    let den = va * va / (a.n - 1) as f64 + vb * vb / (b.n - 1) as f64;
    if den == 0.0 {
        return Err(StatsError::Indeterminate);
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(n: usize, mean: f64, var: f64) -> SampleSummary {
        SampleSummary::new(n, mean, var).unwrap()
    }

    #[test]
    fn equal_summaries_give_zero() {
        let a = summary(17, 0.42, 0.01);
        assert_eq!(welch_t(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn ghz_versus_hidden_shift() {
        let a = summary(2496, 0.168_084_145, 0.003);
        let b = summary(2496, 0.163_739_443, 0.003);
        // 0.004344702 / sqrt(2 * 0.003 / 2496)
        let expected = 0.004_344_702 / (2.0 * 0.003 / 2496.0f64).sqrt();
        let t = welch_t(&a, &b).unwrap();
        assert!((t - expected).abs() < 1e-9);
        assert!((t - 2.8023).abs() < 1e-4);
        assert_eq!(welch_t(&b, &a).unwrap(), -t);
    }

    #[test]
    fn zero_variance_cases() {
        let a = summary(5, 1.0, 0.0);
        let b = summary(5, 1.0, 0.0);
        assert_eq!(welch_t(&a, &b), Err(StatsError::Indeterminate));
        let c = summary(5, 2.0, 0.0);
        assert_eq!(welch_t(&c, &a).unwrap(), f64::INFINITY);
        assert_eq!(welch_t(&a, &c).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn needs_two_observations() {
        let a = summary(1, 1.0, 0.0);
        let b = summary(5, 1.0, 0.2);
        assert!(matches!(
            welch_t(&a, &b),
            Err(StatsError::TooFewSamples { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn welch_df_equal_groups() {
        // equal n and variance: df = 2n − 2
        let a = summary(10, 0.0, 2.0);
        let b = summary(10, 1.0, 2.0);
        assert!((welch_df(&a, &b).unwrap() - 18.0).abs() < 1e-12);
    }
}
