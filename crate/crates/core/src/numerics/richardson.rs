//! Limit estimation for monotone sequences `v(h) -> v*` as `h -> 0`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RichardsonEstimate {
    pub limit: f64,
    /// Magnitude of the correction applied to the last sample.
    pub error: f64,
    /// Fitted order `q`; `None` when the tail is already constant.
    pub order: Option<f64>,
}

/// Fits `v = v* + c h^q` through the last three samples.
///
/// `samples` are `(h_j, v_j)` with `h_j` strictly decreasing. Successive
/// changes at the rounding level of the values are treated as converged.
pub fn richardson_limit(samples: &[(f64, f64)]) -> Result<RichardsonEstimate> {
    if samples.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "richardson_limit needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    if samples.windows(2).any(|w| !(w[1].0 < w[0].0) || w[1].0 <= 0.0) {
        return Err(Error::InvalidInput("richardson_limit needs positive, strictly decreasing h".into()));
    }
    let m = samples.len();
    let (h1, v1) = samples[m - 3];
    let (h2, v2) = samples[m - 2];
    let (h3, v3) = samples[m - 1];
    let d1 = v2 - v1;
    let d2 = v3 - v2;
    let noise = 64.0 * f64::EPSILON * v1.abs().max(v2.abs()).max(v3.abs()).max(f64::MIN_POSITIVE);
    if d2.abs() <= noise {
        return Ok(RichardsonEstimate {
            limit: v3,
            error: d2.abs(),
            order: None,
        });
    }
    if d1.abs() <= noise || d1.signum() != d2.signum() {
        return Err(Error::NonMonotoneSamples);
    }
    let ratio = d2 / d1;
    // The fit only depends on h relative to h1; normalizing keeps h^q away
    // from underflow. (ρ3^q − ρ2^q) / (ρ2^q − 1) decreases towards 0 as q
    // grows; solve for q by bisection on log q.
    let (r2, r3) = (h2 / h1, h3 / h1);
    let model = |q: f64| (r3.powf(q) - r2.powf(q)) / (r2.powf(q) - 1.0);
    let (mut lo, mut hi) = (1e-6f64, 60.0f64);
    if !(ratio < model(lo) && ratio > model(hi)) {
        return Err(Error::NonConvergentSamples { ratio });
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if model(mid) > ratio {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-15 {
            break;
        }
    }
    let q = (lo * hi).sqrt();
    let correction = -d2 * r3.powf(q) / (r3.powf(q) - r2.powf(q));
    Ok(RichardsonEstimate {
        limit: v3 + correction,
        error: correction.abs(),
        order: Some(q),
    })
}
