//! Sample-size planning for the two-sided two-sample t-test.
//!
//! The exact solver works on the pooled-variance test: df = 2n − 2 and
//! noncentrality d·sqrt(n/2). Results are continuous (not rounded up) and
//! floored at one measurement when two per group already reach the target.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    noncentral_t_cdf, noncentral_t_sf, normal_quantile, students_t_quantile, students_t_sf,
    welch_df, welch_t, PowerSpec, SampleSummary, StatsError, TimingDistribution,
};

fn check_effect(d: f64) -> Result<(), StatsError> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(StatsError::NonPositiveEffect(d));
    }
    Ok(())
}

/// Power of the two-sided pooled two-sample t-test with `n` per group.
pub fn two_sample_power(d: f64, n: f64, alpha: f64) -> Result<f64, StatsError> {
    if !(n > 1.0) {
        return Err(StatsError::InvalidArgument(format!(
            "per-group size must exceed 1, got {n}"
        )));
    }
    let df = 2.0 * n - 2.0;
    let ncp = d * (0.5 * n).sqrt();
    let crit = students_t_quantile(1.0 - 0.5 * alpha, df)?;
    Ok(noncentral_t_sf(crit, df, ncp)? + noncentral_t_cdf(-crit, df, ncp)?)
}

/// Per-group n at which the two-sided two-sample t-test reaches
/// `spec.power` for standardized effect `d = |Δμ|/σ`.
///
/// Returns 1.0 when two measurements per group already suffice.
/// `d ≤ 0` cannot be detected with any finite sample and is reported as
/// [`StatsError::NonPositiveEffect`].
pub fn required_sample_size(d: f64, spec: &PowerSpec) -> Result<f64, StatsError> {
    check_effect(d)?;
    let f = |n: f64| two_sample_power(d, n, spec.alpha).map(|p| p - spec.power);

    let floor_n = 2.0;
    let f_floor = f(floor_n)?;
    if f_floor >= 0.0 {
        return Ok(1.0);
    }
    let guess = normal_approx_sample_size(d, spec)?.max(floor_n);
    let (mut lo, mut f_lo) = (floor_n, f_floor);
    let mut hi = (guess * 1.05 + 1.0).max(floor_n + 1.0);
    let mut f_hi = f(hi)?;
    while f_hi < 0.0 {
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        f_hi = f(hi)?;
        if hi > 1e15 {
            return Err(StatsError::InvalidArgument(format!(
                "effect size {d} too small to plan for"
            )));
        }
    }
    // Illinois regula falsi, with bisection as a fallback.
    let mut side = 0i8;
    for _ in 0..300 {
        let mut mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(mid > lo && mid < hi) {
            mid = 0.5 * (lo + hi);
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid < 0.0 {
            lo = mid;
            f_lo = f_mid;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = mid;
            f_hi = f_mid;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
        if hi - lo <= 1e-11 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Normal-approximation n = 2·((z_{1−α/2} + z_{power}) / d)².
pub fn normal_approx_sample_size(d: f64, spec: &PowerSpec) -> Result<f64, StatsError> {
    check_effect(d)?;
    let z = normal_quantile(1.0 - 0.5 * spec.alpha)? + normal_quantile(spec.power)?;
    Ok(2.0 * (z / d) * (z / d))
}

/// Lehr's rule of thumb, n = 16/d² (α = 0.05, power 0.80).
pub fn lehr_sample_size(d: f64) -> Result<f64, StatsError> {
    check_effect(d)?;
    Ok(16.0 / (d * d))
}

/// Brute-force power check: the fraction of `trials` in which `n` draws from
/// each model lead a two-sided Welch test to reject at `spec.alpha`.
///
/// Each trial owns the ChaCha stream `trial` of `seed`, so the estimate does
/// not depend on the degree of parallelism.
pub fn mc_power_oracle(
    p: &TimingDistribution,
    q: &TimingDistribution,
    n: usize,
    spec: &PowerSpec,
    trials: usize,
    seed: u64,
) -> Result<f64, StatsError> {
    if n < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: n });
    }
    if trials < 1000 {
        return Err(StatsError::InvalidArgument(format!(
            "at least 1000 trials required, got {trials}"
        )));
    }
    p.validate()?;
    q.validate()?;
    let rejections: usize = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let a = summarize_draws(p, n, &mut rng);
            let b = summarize_draws(q, n, &mut rng);
            usize::from(rejects(&a, &b, spec.alpha))
        })
        .sum();
    Ok(rejections as f64 / trials as f64)
}

fn summarize_draws(model: &TimingDistribution, n: usize, rng: &mut ChaCha8Rng) -> SampleSummary {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n {
        let x = model.sample(rng);
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    SampleSummary {
        n,
        mean,
        variance: m2 / (n - 1) as f64,
    }
}

fn rejects(a: &SampleSummary, b: &SampleSummary, alpha: f64) -> bool {
    match (welch_t(a, b), welch_df(a, b)) {
        (Ok(t), Ok(df)) => 2.0 * students_t_sf(t.abs(), df) < alpha,
        (Ok(t), Err(_)) => t.is_infinite(),
        _ => false,
    }
}
