//! Special functions: regularized incomplete beta, central and noncentral
//! Student t distributions.
//!
//! `ln_gamma` comes from `statrs` and `erfc` from `libm`; everything built on top of them is
//! local so that precision for very large degrees of freedom (df ~ 1e7, as
//! needed by the Grover same-iteration cells) stays under control.

use statrs::function::gamma::ln_gamma;

use super::normal::{normal_cdf, normal_quantile};
use super::StatsError;

const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 1_000_000;

/// Stirling series remainder: ln Γ(x) − [(x − ½) ln x − x + ½ ln 2π].
fn stirling_remainder(x: f64) -> f64 {
    let x2 = x * x;
    (1.0 / 12.0 - (1.0 / 360.0 - 1.0 / (1260.0 * x2)) / x2) / x
}

/// ln Γ(big) − ln Γ(big + small), accurate when `big` is large.
fn ln_gamma_ratio_large(big: f64, small: f64) -> f64 {
    let sum = big + small;
    -(big - 0.5) * (small / big).ln_1p() - small * sum.ln() + small + stirling_remainder(big)
        - stirling_remainder(sum)
}

/// ln B(a, b) without catastrophic cancellation for one huge argument.
pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    let (small, big) = if a < b { (a, b) } else { (b, a) };
    if big > 1.0e3 {
        ln_gamma(small) + ln_gamma_ratio_large(big, small)
    } else {
        ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
    }
}

/// Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b) with `y = 1 − x` supplied
/// separately so callers can avoid cancellation when x is close to 1.
pub(crate) fn beta_reg_xy(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    // ln of whichever of x, y is near 1 goes through ln_1p of the other.
    let ln_x = if x > 0.5 { (-y).ln_1p() } else { x.ln() };
    let ln_y = if y > 0.5 { (-x).ln_1p() } else { y.ln() };
    let ln_front = a * ln_x + b * ln_y - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        (ln_front.exp() * beta_cf(a, b, x) / a).clamp(0.0, 1.0)
    } else {
        (1.0 - ln_front.exp() * beta_cf(b, a, y) / b).clamp(0.0, 1.0)
    }
}

/// Regularized incomplete beta I_x(a, b).
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    beta_reg_xy(a, b, x, 1.0 - x)
}

/// Survival function of the central Student t distribution, P(T > t).
pub fn students_t_sf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    if df.is_infinite() {
        return normal_cdf(-t);
    }
    let t2 = t * t;
    let denom = df + t2;
    // P(|T| > |t|) = I_{df/(df+t²)}(df/2, 1/2)
    let two_tail = beta_reg_xy(0.5 * df, 0.5, df / denom, t2 / denom);
    if t >= 0.0 {
        0.5 * two_tail
    } else {
        1.0 - 0.5 * two_tail
    }
}

/// CDF of the central Student t distribution.
pub fn students_t_cdf(t: f64, df: f64) -> f64 {
    students_t_sf(-t, df)
}

fn students_t_pdf(t: f64, df: f64) -> f64 {
    let ln_norm = -0.5 * df.ln() - ln_beta(0.5 * df, 0.5);
    (ln_norm - 0.5 * (df + 1.0) * (t * t / df).ln_1p()).exp()
}

/// Quantile of the central Student t distribution.
pub fn students_t_quantile(p: f64, df: f64) -> Result<f64, StatsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::InvalidProbability(p));
    }
    if !(df > 0.0) || df.is_nan() {
        return Err(StatsError::InvalidArgument(format!(
            "degrees of freedom must be positive, got {df}"
        )));
    }
    if df.is_infinite() {
        return normal_quantile(p);
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Solve in the upper tail and reflect.
    let (q, sign) = if p > 0.5 { (1.0 - p, 1.0) } else { (p, -1.0) };
    let f = |t: f64| students_t_sf(t, df) - q;

    let mut lo = 0.0;
    let mut hi = normal_quantile(1.0 - q)?.max(1.0);
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(sign * hi);
        }
    }
    // Safeguarded Newton inside the bracket.
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fv = f(t);
        if fv > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let slope = -students_t_pdf(t, df);
        let mut next = t - fv / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-14 * t.abs().max(1.0) || hi - lo <= 1e-14 * hi.max(1.0) {
            t = next;
            break;
        }
        t = next;
    }
    Ok(sign * t)
}

fn noncentral_t_cdf_nonneg(t: f64, df: f64, ncp: f64) -> f64 {
    let base = normal_cdf(-ncp);
    if t == 0.0 {
        return base;
    }
    let t2 = t * t;
    let denom = t2 + df;
    let x = t2 / denom;
    let y = df / denom;
    let half_df = 0.5 * df;
    let lambda = 0.5 * ncp * ncp;
    if lambda == 0.0 {
        return base + 0.5 * beta_reg_xy(0.5, half_df, x, y);
    }
    let ln_lambda = lambda.ln();
    let sign = ncp.signum();
    let term = |j: f64| -> f64 {
        let p = (-lambda + j * ln_lambda - ln_gamma(j + 1.0)).exp();
        let q = sign * (-lambda + (j + 0.5) * ln_lambda - ln_gamma(j + 1.5)).exp();
        let mut s = 0.0;
        if p > 0.0 {
            s += p * beta_reg_xy(j + 0.5, half_df, x, y);
        }
        if q != 0.0 {
            s += q * beta_reg_xy(j + 1.0, half_df, x, y);
        }
        s
    };
    let weight = |j: f64| -> f64 {
        (-lambda + j * ln_lambda - ln_gamma(j + 1.0)).exp()
            + (-lambda + (j + 0.5) * ln_lambda - ln_gamma(j + 1.5)).exp()
    };

    let mode = lambda.floor();
    let mut sum = term(mode);
    // downwards from the mode
    let mut j = mode - 1.0;
    while j >= 0.0 {
        sum += term(j);
        if weight(j) < 1e-17 {
            break;
        }
        j -= 1.0;
    }
    // upwards from the mode
    let limit = mode + 20.0 * lambda.sqrt() + 200.0;
    let mut j = mode + 1.0;
    while j <= limit {
        sum += term(j);
        if weight(j) < 1e-17 {
            break;
        }
        j += 1.0;
    }
    (base + 0.5 * sum).clamp(0.0, 1.0)
}

fn check_noncentral_args(t: f64, df: f64, ncp: f64) -> Result<(), StatsError> {
    if t.is_nan() || !ncp.is_finite() || df.is_nan() {
        return Err(StatsError::InvalidArgument(format!(
            "non-finite noncentral t argument (t={t}, df={df}, ncp={ncp})"
        )));
    }
    if !(df > 0.0) {
        return Err(StatsError::InvalidArgument(format!(
            "degrees of freedom must be positive, got {df}"
        )));
    }
    Ok(())
}

/// CDF of the noncentral t distribution, P(T' ≤ t).
pub fn noncentral_t_cdf(t: f64, df: f64, ncp: f64) -> Result<f64, StatsError> {
    check_noncentral_args(t, df, ncp)?;
    if t.is_infinite() {
        return Ok(if t > 0.0 { 1.0 } else { 0.0 });
    }
    if df.is_infinite() {
        return Ok(normal_cdf(t - ncp));
    }
    if t >= 0.0 {
        Ok(noncentral_t_cdf_nonneg(t, df, ncp))
    } else {
        Ok(1.0 - noncentral_t_cdf_nonneg(-t, df, -ncp))
    }
}

/// Survival function of the noncentral t distribution, P(T' > t).
pub fn noncentral_t_sf(t: f64, df: f64, ncp: f64) -> Result<f64, StatsError> {
    check_noncentral_args(t, df, ncp)?;
    if t.is_infinite() {
        return Ok(if t > 0.0 { 0.0 } else { 1.0 });
    }
    if df.is_infinite() {
        return Ok(normal_cdf(ncp - t));
    }
    if t >= 0.0 {
        Ok(1.0 - noncentral_t_cdf_nonneg(t, df, ncp))
    } else {
        Ok(noncentral_t_cdf_nonneg(-t, df, -ncp))
    }
}
