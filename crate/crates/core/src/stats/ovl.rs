//! Overlapping coefficient of two Gaussian timing models: the area under
//! min(pdf_p, pdf_q).

use super::{normal_cdf, TimingDistribution};

/// Closed-form OVL. Equal variances use `2Φ(−|Δμ|/2σ)`; otherwise the two
/// density crossings are found from the log-density quadratic and the
/// three pieces are summed with Φ.
pub fn ovl(p: &TimingDistribution, q: &TimingDistribution) -> f64 {
    let (s1, s2) = (p.std_dev(), q.std_dev());
    if p.variance == q.variance {
        let delta = (p.mean - q.mean).abs();
        return 2.0 * normal_cdf(-delta / (2.0 * s1));
    }
    // Order so that `narrow` has the smaller spread.
    let (narrow, wide, sn, sw) = if s1 < s2 { (p, q, s1, s2) } else { (q, p, s2, s1) };
    let (vn, vw) = (narrow.variance, wide.variance);
    // ln pdf_n − ln pdf_w = a x² + b x + c
    let a = 0.5 / vw - 0.5 / vn;
    let b = narrow.mean / vn - wide.mean / vw;
    let c = wide.mean * wide.mean / (2.0 * vw) - narrow.mean * narrow.mean / (2.0 * vn)
        + (sw / sn).ln();
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let root = -0.5 * (b + b.signum() * disc.sqrt());
    let (mut x1, mut x2) = if root == 0.0 {
        let r = (-c / a).max(0.0).sqrt();
        (-r, r)
    } else {
        (root / a, c / root)
    };
    if x1 > x2 {
        std::mem::swap(&mut x1, &mut x2);
    }
    let cdf_n = |x: f64| normal_cdf((x - narrow.mean) / sn);
    let cdf_w = |x: f64| normal_cdf((x - wide.mean) / sw);
    // The narrow density dominates between the crossings.
    let tails = cdf_n(x1) + normal_cdf(-(x2 - narrow.mean) / sn);
    let middle = cdf_w(x2) - cdf_w(x1);
    (tails + middle).clamp(0.0, 1.0)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, eps: f64, depth: u32) -> f64 {
    let c = 0.5 * (a + b);
    let (fa, fb, fc) = (f(a), f(b), f(c));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_step(f, a, b, fa, fb, fc, whole, eps, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let (d, e) = (0.5 * (a + c), 0.5 * (c + b));
    let (fd, fe) = (f(d), f(e));
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, c, fa, fc, fd, left, 0.5 * eps, depth - 1)
        + simpson_step(f, c, b, fc, fb, fe, right, 0.5 * eps, depth - 1)
}

/// OVL by adaptive Simpson integration of `min(pdf_p, pdf_q)`; used as an
/// independent cross-check on [`ovl`].
pub fn ovl_by_integration(p: &TimingDistribution, q: &TimingDistribution) -> f64 {
    let spread = p.std_dev().max(q.std_dev());
    let lo = p.mean.min(q.mean) - 40.0 * spread;
    let hi = p.mean.max(q.mean) + 40.0 * spread;
    let f = |x: f64| p.pdf(x).min(q.pdf(x));
    // Split on a fine grid so the kink at each crossing is isolated.
    let pieces = 400;
    let h = (hi - lo) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let a = lo + i as f64 * h;
            adaptive_simpson(&f, a, a + h, 1e-13, 30)
        })
        .sum::<f64>()
        .clamp(0.0, 1.0)
}
