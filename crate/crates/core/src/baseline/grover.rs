//! Timing catalog of the 24 Grover search variants: 8 three-bit oracle keys
//! times 1, 2 or 3 Grover iterations.
//!
//! Mean latency is linear in the iteration count plus a small per-key offset:
//! `base + iterations·per_iteration + per_oracle_spread·(key/7 − 1/2)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::BaselineError;
use crate::stats::TimingDistribution;

pub const KEYS: u8 = 8;
pub const MAX_ITERATIONS: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroverVariant {
    /// Oracle key, 0..=7, shown as three bits.
    pub key: u8,
    /// 1..=3.
    pub iterations: u8,
    /// 1..=24: iteration-major, key-minor.
    pub index: usize,
    pub timing: TimingDistribution,
}

impl GroverVariant {
    pub fn key_bits(&self) -> String {
        format!("{:03b}", self.key)
    }

    pub fn index_of(key: u8, iterations: u8) -> usize {
        (iterations as usize - 1) * KEYS as usize + key as usize + 1
    }
}

impl fmt::Display for GroverVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "key={} iter={}", self.key_bits(), self.iterations)
    }
}

/// Catalog parameters, all in seconds (variance in seconds²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroverCalibration {
    pub base_latency: f64,
    pub per_iteration: f64,
    pub per_oracle_spread: f64,
    pub variance: f64,
}

impl Default for GroverCalibration {
    /// Simulator-scale defaults (variance 0.003 s²). Adjacent keys need about
    /// 1.8e7 measurements per group, the widest cross-iteration pair about 520.
    fn default() -> Self {
        Self {
            base_latency: 0.17,
            per_iteration: 0.004_584,
            per_oracle_spread: 0.000_356,
            variance: 0.003,
        }
    }
}

impl GroverCalibration {
    pub fn validate(&self) -> Result<(), BaselineError> {
        let positive = [
            ("base_latency", self.base_latency),
            ("per_iteration", self.per_iteration),
            ("variance", self.variance),
        ];
        for (what, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(BaselineError::InvalidParameter(format!(
                    "{what} must be positive, got {v}"
                )));
            }
        }
        if !(self.per_oracle_spread >= 0.0) || !self.per_oracle_spread.is_finite() {
            return Err(BaselineError::InvalidParameter(format!(
                "per_oracle_spread must be non-negative, got {}",
                self.per_oracle_spread
            )));
        }
        if self.per_oracle_spread >= self.per_iteration {
            return Err(BaselineError::InvalidParameter(format!(
                "per_oracle_spread {} must be smaller than per_iteration {}",
                self.per_oracle_spread, self.per_iteration
            )));
        }
        Ok(())
    }

    pub fn key_offset(&self, key: u8) -> f64 {
        self.per_oracle_spread * (key as f64 / (KEYS - 1) as f64 - 0.5)
    }

    pub fn mean(&self, key: u8, iterations: u8) -> f64 {
        self.base_latency + iterations as f64 * self.per_iteration + self.key_offset(key)
    }
}

/// The 24 variants in index order.
pub fn grover_catalog(cal: &GroverCalibration) -> Result<Vec<GroverVariant>, BaselineError> {
    cal.validate()?;
    let mut out = Vec::with_capacity(24);
    for iterations in 1..=MAX_ITERATIONS {
        for key in 0..KEYS {
            out.push(GroverVariant {
                key,
                iterations,
                index: GroverVariant::index_of(key, iterations),
                timing: TimingDistribution::new(cal.mean(key, iterations), cal.variance)?,
            });
        }
    }
    Ok(out)
}
