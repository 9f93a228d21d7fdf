use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::StatsError;

/// Sufficient statistics of a set of duration observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSummary {
    pub n: usize,
    /// Seconds.
    pub mean: f64,
    /// Unbiased variance (divisor n − 1), seconds². Zero when `n == 1`.
    pub variance: f64,
}

impl SampleSummary {
    pub fn new(n: usize, mean: f64, variance: f64) -> Result<Self, StatsError> {
        if n == 0 {
            return Err(StatsError::TooFewSamples { needed: 1, got: 0 });
        }
        if !mean.is_finite() {
            return Err(StatsError::InvalidArgument(format!("mean {mean} is not finite")));
        }
        if !(variance >= 0.0) || !variance.is_finite() {
            return Err(StatsError::InvalidArgument(format!(
                "variance {variance} must be finite and non-negative"
            )));
        }
        if n == 1 && variance != 0.0 {
            return Err(StatsError::InvalidArgument(
                "a single observation has no variance".into(),
            ));
        }
        Ok(Self { n, mean, variance })
    }

    /// Welford pass over the observations.
    pub fn from_samples(samples: &[f64]) -> Result<Self, StatsError> {
        if samples.is_empty() {
            return Err(StatsError::TooFewSamples { needed: 1, got: 0 });
        }
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            if !x.is_finite() {
                return Err(StatsError::InvalidArgument(format!("observation {x} is not finite")));
            }
            let delta = x - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (x - mean);
        }
        let n = samples.len();
        let variance = if n > 1 { (m2 / (n - 1) as f64).max(0.0) } else { 0.0 };
        Ok(Self { n, mean, variance })
    }

    /// A single observation carries no spread information.
    pub fn is_degenerate(&self) -> bool {
        self.n < 2
    }

    pub fn std_error(&self) -> f64 {
        (self.variance / self.n as f64).sqrt()
    }
}

/// Gaussian latency model for one circuit on one backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingDistribution {
    /// Seconds.
    pub mean: f64,
    /// Seconds².
    pub variance: f64,
}

impl TimingDistribution {
    pub fn new(mean: f64, variance: f64) -> Result<Self, StatsError> {
        let dist = Self { mean, variance };
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        if !self.mean.is_finite() {
            return Err(StatsError::InvalidArgument(format!(
                "mean {} is not finite",
                self.mean
            )));
        }
        if !(self.variance > 0.0) || !self.variance.is_finite() {
            return Err(StatsError::InvalidArgument(format!(
                "variance {} must be positive and finite",
                self.variance
            )));
        }
        Ok(())
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let sd = self.std_dev();
        super::normal_pdf((x - self.mean) / sd) / sd
    }

    /// One Gaussian draw. `mean + sd·z` keeps the mean exact as sd → 0.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean + self.std_dev() * z
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Significance level and target power of a two-sided two-sample test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSpec {
    pub alpha: f64,
    pub power: f64,
}

impl PowerSpec {
    pub fn new(alpha: f64, power: f64) -> Result<Self, StatsError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(StatsError::InvalidProbability(alpha));
        }
        if !(power > 0.0 && power < 1.0) {
            return Err(StatsError::InvalidProbability(power));
        }
        Ok(Self { alpha, power })
    }
}

impl Default for PowerSpec {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            power: 0.80,
        }
    }
}
