//! Finite-difference stencils shared by the solvers and diagnostics.

/// Centered first derivative, exact for quadratics.
#[inline]
pub fn centered_first(minus: f64, plus: f64, h: f64) -> f64 {
    (plus - minus) / (2.0 * h)
}

/// Centered second derivative, exact for cubics.
#[inline]
pub fn centered_second(minus: f64, center: f64, plus: f64, h: f64) -> f64 {
    (plus - 2.0 * center + minus) / (h * h)
}

/// One-sided three-point first derivative at the first of three equally
/// spaced samples `u0, u1, u2` (spacing `h`, increasing abscissa).
#[inline]
pub fn forward_first(u0: f64, u1: f64, u2: f64, h: f64) -> f64 {
    (-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * h)
}

/// One-sided three-point first derivative at the last of three equally
/// spaced samples `u0, u1, u2`.
#[inline]
pub fn backward_first(u0: f64, u1: f64, u2: f64, h: f64) -> f64 {
    (u0 - 4.0 * u1 + 3.0 * u2) / (2.0 * h)
}

/// First derivatives along a uniformly spaced line: centered inside,
/// three-point one-sided at both ends.
pub fn gradient_1d(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        2 => vec![(values[1] - values[0]) / h; 2],
        _ => (0..n)
            .map(|i| {
                if i == 0 {
                    forward_first(values[0], values[1], values[2], h)
                } else if i == n - 1 {
                    backward_first(values[n - 3], values[n - 2], values[n - 1], h)
                } else {
                    centered_first(values[i - 1], values[i + 1], h)
                }
            })
            .collect(),
    }
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
