//! Difference-of-means series.
//!
//! For every prefix length n the series records the difference of the two
//! running means and the half-width of the equal-population confidence band
//! `z · sqrt(var_a/n + var_b/n)`, using running unbiased variances since the
//! attacker does not know the population spread. A pair is distinguished at
//! n when `|dom| > band`.

use super::{normal_quantile, StatsError, TimingDistribution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomPoint {
    pub n: usize,
    /// Seconds.
    pub dom: f64,
    /// Seconds.
    pub band: f64,
}

impl DomPoint {
    pub fn exceeds(&self) -> bool {
        self.dom.abs() > self.band
    }
}

#[derive(Default)]
struct Running {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Running {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    fn variance(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            (self.m2 / (self.n - 1.0)).max(0.0)
        }
    }
}

fn band_quantile(confidence: f64) -> Result<f64, StatsError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::InvalidProbability(confidence));
    }
    normal_quantile(0.5 * (1.0 + confidence))
}

/// DoM series of two ordered sample sets over prefixes n = 2..min(len).
pub fn dom_series(a: &[f64], b: &[f64], confidence: f64) -> Result<Vec<DomPoint>, StatsError> {
    let z = band_quantile(confidence)?;
    let len = a.len().min(b.len());
    if len < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: len });
    }
    let mut ra = Running::default();
    let mut rb = Running::default();
    let mut out = Vec::with_capacity(len - 1);
    for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
        ra.push(x);
        rb.push(y);
        let n = i + 1;
        if n < 2 {
            continue;
        }
        let nf = n as f64;
        out.push(DomPoint {
            n,
            dom: ra.mean - rb.mean,
            band: z * (ra.variance() / nf + rb.variance() / nf).sqrt(),
        });
    }
    Ok(out)
}

/// DoM series of one ordered sample set against a reference model whose mean
/// and variance are known; the band uses the running sample variance for the
/// observed side and the model variance for the reference side.
pub fn dom_series_against_model(
    samples: &[f64],
    model: &TimingDistribution,
    confidence: f64,
) -> Result<Vec<DomPoint>, StatsError> {
    let z = band_quantile(confidence)?;
    if samples.len() < 2 {
        return Err(StatsError::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let mut r = Running::default();
    let mut out = Vec::with_capacity(samples.len() - 1);
    for (i, &x) in samples.iter().enumerate() {
        r.push(x);
        let n = i + 1;
        if n < 2 {
            continue;
        }
        let nf = n as f64;
        out.push(DomPoint {
            n,
            dom: r.mean - model.mean,
            band: z * ((r.variance() + model.variance) / nf).sqrt(),
        });
    }
    Ok(out)
}

/// Prefix length of the first point whose |dom| exceeds the band.
pub fn first_crossing(series: &[DomPoint]) -> Option<usize> {
    series.iter().find(|p| p.exceeds()).map(|p| p.n)
}
