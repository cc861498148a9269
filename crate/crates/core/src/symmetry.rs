//! Symmetry diagnostics on computed polar fields: gradient split, the
//! gradient hypotheses for radial symmetry, tangential-gradient and Lie
//! derivative bounds, angular second differences, the Laplace–Beltrami
//! positive part and the moving-plane inequality.
//!
//! All diagnostics are pure functions of [`PolarField`]s. Checks that only
//! make sense where the grid resolves the large solution take a
//! `resolved_radius`; rings beyond it are ignored.

use std::f64::consts::PI;

use serde::Serialize;

use crate::disk::{psi, DiskSolution, PolarField, PolarGrid};
use crate::error::{Error, Result};
use crate::numerics::stencil::{backward_first, centered_first, linear_fit};

/// `∂u/∂r` and `(1/r) ∂u/∂θ` at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSplit {
    pub grid: PolarGrid,
    pub radial: Vec<f64>,
    pub tangential: Vec<f64>,
}

impl GradientSplit {
    pub fn min_radial(&self, i: usize) -> f64 {
        self.ring(&self.radial, i).iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_radial(&self, i: usize) -> f64 {
        self.ring(&self.radial, i).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_tangential(&self, i: usize) -> f64 {
        self.ring(&self.tangential, i).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `ρ(r_i) = max_θ |∇_τ u| / min_θ ∂u/∂r`.
    pub fn ratio(&self, i: usize) -> f64 {
        self.max_tangential(i) / self.min_radial(i)
    }

    /// `|∇u|²` at node `(i, m)`.
    pub fn norm_sq(&self, i: usize, m: usize) -> f64 {
        let k = self.grid.index(i, m);
        self.radial[k] * self.radial[k] + self.tangential[k] * self.tangential[k]
    }

    /// `∂u/∂x·e` for the unit vector at angle `alpha`.
    pub fn directional(&self, i: usize, m: usize, alpha: f64) -> f64 {
        let k = self.grid.index(i, m);
        let t = self.grid.theta(m) - alpha;
        self.radial[k] * t.cos() - self.tangential[k] * t.sin()
    }

    fn ring<'a>(&self, v: &'a [f64], i: usize) -> &'a [f64] {
        let n = self.grid.ntheta;
        &v[i * n..(i + 1) * n]
    }
}

/// Centered differences; across the pole the neighbour of the first ring is
/// the first ring at `θ + π`, and the outer ring uses the backward
/// three-point formula.
pub fn gradient_split(field: &PolarField) -> GradientSplit {
    let g = &field.grid;
    let (h, ht) = (g.dr(), g.dtheta());
    let mut radial = vec![0.0; g.len()];
    let mut tangential = vec![0.0; g.len()];
    for i in 0..g.nr {
        let r = g.r(i);
        for m in 0..g.ntheta {
            let k = g.index(i, m);
            radial[k] = if i == 0 {
                centered_first(field.at(0, g.opposite(m)), field.at(1, m), h)
            } else if i + 1 == g.nr {
                backward_first(field.at(i - 2, m), field.at(i - 1, m), field.at(i, m), h)
            } else {
                centered_first(field.at(i - 1, m), field.at(i + 1, m), h)
            };
            let dtheta = centered_first(field.at(i, g.wrap(m, -1)), field.at(i, g.wrap(m, 1)), ht);
            tangential[k] = dtheta / r;
        }
    }
    GradientSplit {
        grid: g.clone(),
        radial,
        tangential,
    }
}

/// `∂u/∂θ` by trigonometric interpolation on each ring (the Nyquist mode
/// is dropped).
pub fn angular_derivative_spectral(field: &PolarField) -> Vec<f64> {
    let g = &field.grid;
    let n = g.ntheta;
    let (cos, sin): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / n as f64;
            (a.cos(), a.sin())
        })
        .unzip();
    let mut out = vec![0.0; g.len()];
    for i in 0..g.nr {
        let ring = field.ring(i);
        let mut deriv = vec![0.0; n];
        if field.oscillation(i) == 0.0 {
            continue;
        }
        for k in 1..n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (m, &v) in ring.iter().enumerate() {
                let j = (k * m) % n;
                re += v * cos[j];
                im -= v * sin[j];
            }
            // d/dθ of the pair k, −k: 2k/n · (−re sin kθ − im cos kθ).
            let scale = 2.0 * k as f64 / n as f64;
            for (m, d) in deriv.iter_mut().enumerate() {
                let j = (k * m) % n;
                *d += scale * (-re * sin[j] - im * cos[j]);
            }
        }
        out[i * n..(i + 1) * n].copy_from_slice(&deriv);
    }
    out
}

/// `osc(r_i) = max_m u − min_m u` for every ring.
pub fn angular_oscillation(field: &PolarField) -> Vec<f64> {
    (0..field.grid.nr).map(|i| field.oscillation(i)).collect()
}

/// Rings with `r ≤ resolved_radius`.
fn resolved_rings(grid: &PolarGrid, resolved_radius: f64) -> usize {
    (0..grid.nr).take_while(|&i| grid.r(i) <= resolved_radius * (1.0 + 1e-12)).count()
}

/// Nearest ring to `r`.
fn ring_of(grid: &PolarGrid, r: f64) -> usize {
    ((r / grid.dr() - 0.5).round().max(0.0) as usize).min(grid.nr - 1)
}

/// Rings of the last resolved decade `R − r ∈ [R − r_res, 10 (R − r_res)]`.
pub fn last_resolved_decade(grid: &PolarGrid, resolved_radius: f64) -> Vec<usize> {
    let d_lo = grid.radius - resolved_radius;
    let d_hi = 10.0 * d_lo;
    (0..resolved_rings(grid, resolved_radius))
        .filter(|&i| grid.radius - grid.r(i) <= d_hi)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Report {
    pub radii: Vec<f64>,
    pub min_radial: Vec<f64>,
    pub ratio: Vec<f64>,
    pub divergence_threshold: f64,
    /// `min_θ ∂u/∂r` increases toward `R` across the window.
    pub radial_increasing: bool,
    /// ... and exceeds the threshold at the last ring.
    pub exceeds_threshold: bool,
    /// `ρ` decreases toward `R` across the window.
    pub ratio_decreasing: bool,
}

impl Theorem1Report {
    pub fn condition_i(&self) -> bool {
        self.radial_increasing && self.exceeds_threshold
    }

    pub fn condition_ii(&self) -> bool {
        self.ratio_decreasing
    }
}

/// Evaluates both gradient hypotheses on the rings nearest to `window`.
pub fn check_theorem1_hypotheses(
    split: &GradientSplit,
    window: &[f64],
    resolved_radius: f64,
    divergence_threshold: f64,
) -> Result<Theorem1Report> {
    let grid = &split.grid;
    if let Some(&r) = window.iter().find(|&&r| r > resolved_radius) {
        return Err(Error::WindowUnresolved {
            radius: r,
            resolved: resolved_radius,
        });
    }
    let mut rings: Vec<usize> = window.iter().map(|&r| ring_of(grid, r)).collect();
    rings.sort_unstable();
    rings.dedup();
    let min_radial: Vec<f64> = rings.iter().map(|&i| split.min_radial(i)).collect();
    let ratio: Vec<f64> = rings
        .iter()
        .map(|&i| {
            let t = split.max_tangential(i);
            if t == 0.0 {
                0.0
            } else {
                t / split.min_radial(i)
            }
        })
        .collect();
    let radial_increasing = min_radial.windows(2).all(|w| w[1] > w[0]);
    let exceeds_threshold = min_radial.last().is_some_and(|&v| v > divergence_threshold);
    let ratio_decreasing = ratio.iter().all(|&r| r == 0.0) || ratio.windows(2).all(|w| w[1] < w[0] && w[1] >= 0.0);
    Ok(Theorem1Report {
        radii: rings.iter().map(|&i| grid.r(i)).collect(),
        min_radial,
        ratio,
        divergence_threshold,
        radial_increasing,
        exceeds_threshold,
        ratio_decreasing,
    })
}

/// `y ≈ C d^q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerFit {
    pub c: f64,
    pub exponent: f64,
    pub identically_zero: bool,
}

/// Least-squares fit of `log y` against `log d`; `None` with fewer than two
/// positive samples.
pub fn fit_power(d: &[f64], y: &[f64]) -> Option<PowerFit> {
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Some(PowerFit {
            c: 0.0,
            exponent: f64::INFINITY,
            identically_zero: true,
        });
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = d
        .iter()
        .zip(y)
        .filter(|(&d, &y)| d > 0.0 && y > 1e-14 * scale)
        .map(|(d, y)| (d.ln(), y.ln()))
        .unzip();
    let (slope, intercept) = linear_fit(&lx, &ly)?;
    Some(PowerFit {
        c: intercept.exp(),
        exponent: slope,
        identically_zero: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Report {
    /// Rings of the last resolved decade.
    pub radii: Vec<f64>,
    /// `max_θ |∇_τ u|` on those rings, one row per level.
    pub max_tangential: Vec<Vec<f64>>,
    /// Every ring's tangential maximum decreases from level to level.
    pub tangential_decreasing: bool,
    /// `max_θ |∂u/∂θ| ≈ C (R − r)^q` at the top level.
    pub fit: Option<PowerFit>,
    pub outer_radius: f64,
    /// `min_θ ∂u/∂r` at the outermost resolved ring, per level.
    pub min_radial_outer: Vec<f64>,
    pub radial_strictly_increasing: bool,
    pub divergence_threshold: f64,
    /// Top over bottom of `min_radial_outer`.
    pub growth_factor: f64,
    /// `ρ` at the outermost resolved ring, per level.
    pub ratio_outer: Vec<f64>,
}

/// Minimum fitted exponent accepted for the tangential bound.
pub const MIN_TANGENTIAL_EXPONENT: f64 = 0.9;

impl Lemma1Report {
    pub fn limit_i(&self) -> bool {
        self.tangential_decreasing
            && self
                .fit
                .is_some_and(|f| f.identically_zero || f.exponent >= MIN_TANGENTIAL_EXPONENT)
    }

    /// Bottom over top of `ratio_outer`; infinite when the top ratio is 0.
    pub fn ratio_decay(&self) -> f64 {
        let (first, last) = (self.ratio_outer[0], self.ratio_outer[self.ratio_outer.len() - 1]);
        if last == 0.0 {
            f64::INFINITY
        } else {
            first / last
        }
    }

    pub fn limit_ii(&self) -> bool {
        self.radial_strictly_increasing && self.min_radial_outer.last().is_some_and(|&v| v > self.divergence_threshold)
    }
}

/// Default divergence threshold: ten times the largest radial derivative of
/// the first level on the resolved region.
pub fn default_divergence_threshold(bottom: &PolarField, resolved_radius: f64) -> f64 {
    let split = gradient_split(bottom);
    let rings = resolved_rings(&bottom.grid, resolved_radius);
    10.0 * (0..rings).map(|i| split.max_radial(i)).fold(f64::NEG_INFINITY, f64::max)
}

/// Trends of the tangential and radial derivatives along a ladder.
pub fn lemma1_limits(levels: &[&PolarField], resolved_radius: f64, divergence_threshold: Option<f64>) -> Result<Lemma1Report> {
    if levels.len() < 3 {
        return Err(Error::InsufficientLadder {
            needed: 3,
            got: levels.len(),
        });
    }
    let grid = &levels[0].grid;
    let rings = last_resolved_decade(grid, resolved_radius);
    if rings.is_empty() {
        return Err(Error::WindowUnresolved {
            radius: grid.r(0),
            resolved: resolved_radius,
        });
    }
    let outer = *rings.last().expect("nonempty");
    let threshold = divergence_threshold.unwrap_or_else(|| default_divergence_threshold(levels[0], resolved_radius));
    let splits: Vec<GradientSplit> = levels.iter().map(|f| gradient_split(f)).collect();
    let max_tangential: Vec<Vec<f64>> = splits
        .iter()
        .map(|s| rings.iter().map(|&i| s.max_tangential(i)).collect())
        .collect();
    let tangential_decreasing = max_tangential
        .windows(2)
        .all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| b < a || (*a == 0.0 && *b == 0.0)));
    let top = splits.last().expect("nonempty");
    let d: Vec<f64> = rings.iter().map(|&i| grid.radius - grid.r(i)).collect();
    let lie: Vec<f64> = rings.iter().map(|&i| grid.r(i) * top.max_tangential(i)).collect();
    let min_radial_outer: Vec<f64> = splits.iter().map(|s| s.min_radial(outer)).collect();
    let radial_strictly_increasing = min_radial_outer.windows(2).all(|w| w[1] > w[0]);
    let growth_factor = min_radial_outer[min_radial_outer.len() - 1] / min_radial_outer[0];
    Ok(Lemma1Report {
        radii: rings.iter().map(|&i| grid.r(i)).collect(),
        max_tangential,
        tangential_decreasing,
        fit: fit_power(&d, &lie),
        outer_radius: grid.r(outer),
        min_radial_outer,
        radial_strictly_increasing,
        divergence_threshold: threshold,
        growth_factor,
        ratio_outer: splits
            .iter()
            .map(|s| if s.max_tangential(outer) == 0.0 { 0.0 } else { s.ratio(outer) })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LieReport {
    /// Smallest `L` with `|∂u/∂θ| ≤ L Ψ` on the annulus.
    pub l: f64,
    pub r0: f64,
    pub resolved_radius: f64,
    pub rings: usize,
}

/// Relative change allowed for `L` under refinement.
pub const LIE_STABILITY: f64 = 0.2;

impl LieReport {
    /// `L` finite here and within [`LIE_STABILITY`] of `finer`.
    pub fn stable_against(&self, finer: &LieReport) -> bool {
        self.l.is_finite() && finer.l.is_finite() && (self.l - finer.l).abs() <= LIE_STABILITY * self.l.max(finer.l)
    }
}

/// `L = max |∂u/∂θ| / Ψ(r)` over rings `r₀ ≤ r ≤ resolved_radius` (`r < R`),
/// with `∂u/∂θ` from trigonometric interpolation.
pub fn lie_derivative_bound(field: &PolarField, r0: f64, resolved_radius: f64) -> LieReport {
    let grid = &field.grid;
    let dtheta = angular_derivative_spectral(field);
    let mut l: f64 = 0.0;
    let mut rings = 0;
    for i in annulus(grid, r0, resolved_radius) {
        rings += 1;
        let weight = psi(grid.radius, r0, grid.r(i));
        for m in 0..grid.ntheta {
            l = l.max(dtheta[grid.index(i, m)].abs() / weight);
        }
    }
    LieReport {
        l,
        r0,
        resolved_radius,
        rings,
    }
}

fn annulus(grid: &PolarGrid, r0: f64, resolved_radius: f64) -> impl Iterator<Item = usize> + '_ {
    let hi = resolved_radius.min(grid.radius);
    (0..grid.nr).filter(move |&i| {
        let r = grid.r(i);
        r >= r0 * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12) && r < grid.radius
    })
}

/// `w^h = h^{−2}(u(θ + h) + u(θ − h) − 2u)` with `h = shift·Δθ`.
pub fn angular_second_difference(field: &PolarField, shift: usize) -> Vec<f64> {
    let g = &field.grid;
    let h = shift as f64 * g.dtheta();
    let s = shift as isize;
    let mut out = vec![0.0; g.len()];
    for i in 0..g.nr {
        for m in 0..g.ntheta {
            let c = field.at(i, m);
            out[g.index(i, m)] = (field.at(i, g.wrap(m, s)) + field.at(i, g.wrap(m, -s)) - 2.0 * c) / (h * h);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondDifferenceReport {
    /// Calibrated on the first ring with `r ≥ r₀`.
    pub l_tilde: f64,
    pub calibration_radius: f64,
    /// `max ((w^h)₊ − L̃ Ψ)` over the annulus.
    pub worst_excess: f64,
    pub worst_radius: f64,
    pub floor: f64,
    pub pass: bool,
}

/// `(w^h)₊ ≤ L̃ Ψ` on the annulus `r₀ ≤ r ≤ resolved_radius`, with `L̃`
/// taken from the inner circle.
pub fn second_difference_check(field: &PolarField, r0: f64, resolved_radius: f64, shift: usize) -> Result<SecondDifferenceReport> {
    let grid = &field.grid;
    let rings: Vec<usize> = annulus(grid, r0, resolved_radius).collect();
    let Some(&first) = rings.first() else {
        return Err(Error::WindowUnresolved {
            radius: r0,
            resolved: resolved_radius,
        });
    };
    let w = angular_second_difference(field, shift);
    let h = shift as f64 * grid.dtheta();
    let u_max = field.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 64.0 * f64::EPSILON * u_max / (h * h);
    let positive = |i: usize| (0..grid.ntheta).map(|m| w[grid.index(i, m)].max(0.0)).fold(0.0, f64::max);
    let calibration_radius = grid.r(first);
    let l_tilde = positive(first) / psi(grid.radius, r0, calibration_radius);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_radius = calibration_radius;
    for &i in &rings {
        let bound = l_tilde * psi(grid.radius, r0, grid.r(i));
        let excess = positive(i) - bound;
        if excess > worst_excess {
            worst_excess = excess;
            worst_radius = grid.r(i);
        }
    }
    Ok(SecondDifferenceReport {
        l_tilde,
        calibration_radius,
        worst_excess,
        worst_radius,
        floor,
        pass: worst_excess <= floor,
    })
}

/// `max_θ (∂²u/∂θ²)₊` per ring (centered second difference).
pub fn laplace_beltrami_positive_part(field: &PolarField) -> Vec<f64> {
    let w = angular_second_difference(field, 1);
    let n = field.grid.ntheta;
    (0..field.grid.nr)
        .map(|i| w[i * n..(i + 1) * n].iter().fold(0.0f64, |m, &v| m.max(v)))
        .collect()
}

/// Whether `profile` decreases (non-strictly, up to `floor`) across `rings`.
pub fn decreasing_on(profile: &[f64], rings: &[usize], floor: f64) -> bool {
    rings.windows(2).all(|w| profile[w[1]] <= profile[w[0]] + floor)
}

/// Reflection planes `{x·e = λ}` with `e = (cos α, sin α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingPlaneFrame {
    pub direction: f64,
    pub offsets: Vec<f64>,
}

impl MovingPlaneFrame {
    pub fn new(direction: f64, offsets: Vec<f64>, radius: f64) -> Result<Self> {
        if let Some(&bad) = offsets.iter().find(|&&l| !(l > 0.0 && l < radius)) {
            return Err(Error::OffsetOutsideDomain(bad));
        }
        Ok(Self { direction, offsets })
    }

    /// `λ_j = j R / Nr`, `j = 1 … Nr − 1`.
    pub fn uniform(grid: &PolarGrid, direction: f64) -> Self {
        Self {
            direction,
            offsets: (1..grid.nr).map(|j| j as f64 * grid.dr()).collect(),
        }
    }

    /// `x_λ = x − 2 (x·e − λ) e`.
    pub fn reflect(&self, lambda: f64, x: f64, y: f64) -> (f64, f64) {
        let (c, s) = (self.direction.cos(), self.direction.sin());
        let t = 2.0 * (x * c + y * s - lambda);
        (x - t * c, y - t * s)
    }
}

/// Linear in `θ` on ring `i`.
fn angular_interp(field: &PolarField, i: usize, phi: f64) -> f64 {
    let g = &field.grid;
    let s = phi.rem_euclid(2.0 * PI) / g.dtheta();
    let m = (s.floor() as usize) % g.ntheta;
    let f = s - s.floor();
    (1.0 - f) * field.at(i, m) + f * field.at(i, (m + 1) % g.ntheta)
}

/// Bilinear interpolation in `(r, θ)` at the Cartesian point `(x, y)`.
/// Inside the first ring it interpolates along the diameter through the
/// pole between the first ring at `φ` and at `φ + π`.
pub fn interpolate(field: &PolarField, x: f64, y: f64) -> f64 {
    let g = &field.grid;
    let rho = x.hypot(y);
    let phi = y.atan2(x);
    let r0 = g.r(0);
    if rho < r0 {
        let a = angular_interp(field, 0, phi);
        let b = angular_interp(field, 0, phi + PI);
        return ((r0 + rho) * a + (r0 - rho) * b) / (2.0 * r0);
    }
    let s = (rho / g.dr() - 0.5).min((g.nr - 1) as f64);
    let i = (s.floor() as usize).min(g.nr - 2);
    let t = s - i as f64;
    (1.0 - t) * angular_interp(field, i, phi) + t * angular_interp(field, i + 1, phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlaneRecord {
    pub lambda: f64,
    /// `min (u(x) − u(x_λ))` over nodes of `Σ_λ`.
    pub min_difference: f64,
    /// `min ∂u/∂x·e` over nodes of `Σ_λ`.
    pub min_derivative: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MovingPlaneReport {
    pub direction: f64,
    pub records: Vec<PlaneRecord>,
    pub tol_grid: f64,
    /// Smallest offset above which every record clears `−tol_grid`.
    pub mu_hat: f64,
    /// `μ̂` at most one radial spacing.
    pub consistent: bool,
}

impl MovingPlaneReport {
    /// Worst violation `max(0, −min_difference)` per offset.
    pub fn violations(&self) -> Vec<f64> {
        self.records.iter().map(|r| (-r.min_difference).max(0.0)).collect()
    }
}

fn cap_nodes<'a>(grid: &'a PolarGrid, frame: &'a MovingPlaneFrame, lambda: f64) -> impl Iterator<Item = (usize, usize, f64, f64)> + 'a {
    (0..grid.nr).flat_map(move |i| {
        let r = grid.r(i);
        (0..grid.ntheta).filter_map(move |m| {
            let t = grid.theta(m);
            let (x, y) = (r * t.cos(), r * t.sin());
            (x * frame.direction.cos() + y * frame.direction.sin() > lambda).then_some((i, m, x, y))
        })
    })
}

/// Four-point Lagrange interpolation of ring values at radius `rho`, with
/// the even extension across the pole.
fn cubic_radial(values: &[f64], grid: &PolarGrid, rho: f64) -> f64 {
    let h = grid.dr();
    let s = rho / h - 0.5;
    let base = (s.floor() as isize - 1).min(grid.nr as isize - 4);
    let at = |j: isize| -> f64 {
        let idx = if j < 0 { (-j - 1) as usize } else { j as usize };
        values[idx.min(grid.nr - 1)]
    };
    let mut out = 0.0;
    for a in 0..4 {
        let ja = base + a;
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                let jb = base + b;
                w *= (s - jb as f64) / (ja - jb) as f64;
            }
        }
        out += w * at(ja);
    }
    out
}

/// Three times the largest reflection-interpolation error on the ring-mean
/// (radial) part of `field`, measured against cubic interpolation.
pub fn reflection_tolerance(field: &PolarField, frame: &MovingPlaneFrame) -> f64 {
    let grid = &field.grid;
    let means: Vec<f64> = (0..grid.nr).map(|i| field.ring_mean(i)).collect();
    let radial = PolarField {
        grid: grid.clone(),
        values: means.iter().flat_map(|&v| std::iter::repeat_n(v, grid.ntheta)).collect(),
    };
    let mut worst: f64 = 0.0;
    for &lambda in &frame.offsets {
        for (_, _, x, y) in cap_nodes(grid, frame, lambda) {
            let (xr, yr) = frame.reflect(lambda, x, y);
            let err = interpolate(&radial, xr, yr) - cubic_radial(&means, grid, xr.hypot(yr));
            worst = worst.max(err.abs());
        }
    }
    let scale = field.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    3.0 * worst + 64.0 * f64::EPSILON * scale
}

/// Compares `u(x)` with the interpolated reflection `u(x_λ)` at every node
/// of every cap `Σ_λ`, and records the directional derivative there.
pub fn moving_plane_check(field: &PolarField, frame: &MovingPlaneFrame, tol_grid: f64) -> Result<MovingPlaneReport> {
    let grid = &field.grid;
    if let Some(&bad) = frame.offsets.iter().find(|&&l| !(l > 0.0 && l < grid.radius)) {
        return Err(Error::OffsetOutsideDomain(bad));
    }
    let split = gradient_split(field);
    let mut records: Vec<PlaneRecord> = frame
        .offsets
        .iter()
        .map(|&lambda| {
            let mut rec = PlaneRecord {
                lambda,
                min_difference: f64::INFINITY,
                min_derivative: f64::INFINITY,
                nodes: 0,
            };
            for (i, m, x, y) in cap_nodes(grid, frame, lambda) {
                let (xr, yr) = frame.reflect(lambda, x, y);
                rec.min_difference = rec.min_difference.min(field.at(i, m) - interpolate(field, xr, yr));
                rec.min_derivative = rec.min_derivative.min(split.directional(i, m, frame.direction));
                rec.nodes += 1;
            }
            rec
        })
        .collect();
    records.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let mu_hat = records
        .iter()
        .filter(|r| r.min_difference < -tol_grid || r.min_derivative < -tol_grid)
        .map(|r| r.lambda)
        .fold(0.0, f64::max);
    Ok(MovingPlaneReport {
        direction: frame.direction,
        records,
        tol_grid,
        mu_hat,
        consistent: mu_hat <= grid.dr() * (1.0 + 1e-12),
    })
}

/// Moving-plane reports for `count` equally spaced directions.
pub fn moving_plane_fan(field: &PolarField, count: usize) -> Result<Vec<MovingPlaneReport>> {
    (0..count)
        .map(|k| {
            let frame = MovingPlaneFrame::uniform(&field.grid, 2.0 * PI * k as f64 / count as f64);
            let tol = reflection_tolerance(field, &frame);
            moving_plane_check(field, &frame, tol)
        })
        .collect()
}

/// Everything the symmetry stage reports on a ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub resolved_radius: f64,
    pub r0: f64,
    pub radii: Vec<f64>,
    /// Angular oscillation per ring at the top level.
    pub osc: Vec<f64>,
    /// `ρ(r)` per ring at the top level.
    pub ratio: Vec<f64>,
    /// `osc(R/2)` per level.
    pub osc_half_radius: Vec<f64>,
    pub lemma1: Lemma1Report,
    pub lie_fit: LieReport,
    pub second_difference: SecondDifferenceReport,
    pub laplace_beltrami: Vec<f64>,
    pub laplace_beltrami_decreasing: bool,
    /// Worst violation per offset, first direction.
    pub mp_violations: Vec<f64>,
    /// Largest `μ̂` over the direction fan.
    pub mu_hat: f64,
    pub mu_hat_per_direction: Vec<f64>,
}

impl SymmetryReport {
    pub fn moving_plane_consistent(&self, grid: &PolarGrid) -> bool {
        self.mu_hat <= grid.dr() * (1.0 + 1e-12)
    }
}

/// Runs every diagnostic on a ladder. `directions` planes are tested; the
/// divergence threshold defaults to [`default_divergence_threshold`].
pub fn symmetry_report(
    levels: &[DiskSolution],
    resolved_radius: f64,
    r0: f64,
    directions: usize,
    threshold: Option<f64>,
) -> Result<SymmetryReport> {
    let fields: Vec<&PolarField> = levels.iter().map(|s| &s.field).collect();
    let top = *fields.last().ok_or(Error::InsufficientLadder { needed: 3, got: 0 })?;
    let grid = &top.grid;
    let lemma1 = lemma1_limits(&fields, resolved_radius, threshold)?;
    let split = gradient_split(top);
    let lb = laplace_beltrami_positive_part(top);
    let lb_rings: Vec<usize> = annulus(grid, r0, resolved_radius).collect();
    let lb_floor = 64.0 * f64::EPSILON * top.values.iter().fold(0.0f64, |m, v| m.max(v.abs())) / (grid.dtheta() * grid.dtheta());
    let fan = moving_plane_fan(top, directions)?;
    Ok(SymmetryReport {
        resolved_radius,
        r0,
        radii: grid.radii(),
        osc: angular_oscillation(top),
        ratio: (0..grid.nr).map(|i| split.ratio(i)).collect(),
        osc_half_radius: fields.iter().map(|f| f.oscillation_at(0.5 * grid.radius)).collect(),
        lemma1,
        lie_fit: lie_derivative_bound(top, r0, resolved_radius),
        second_difference: second_difference_check(top, r0, resolved_radius, 1)?,
        laplace_beltrami_decreasing: decreasing_on(&lb, &lb_rings, lb_floor),
        laplace_beltrami: lb,
        mp_violations: fan.first().map(|r| r.violations()).unwrap_or_default(),
        mu_hat: fan.iter().map(|r| r.mu_hat).fold(0.0, f64::max),
        mu_hat_per_direction: fan.iter().map(|r| r.mu_hat).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> PolarGrid {
        PolarGrid::new(1.0, 40, 32).unwrap()
    }

    #[test]
    fn split_of_square_is_exact() {
        let g = grid();
        let s = gradient_split(&g.sample(|r, _| r * r));
        for i in 0..g.nr {
            for m in 0..g.ntheta {
                let k = g.index(i, m);
                assert!((s.radial[k] - 2.0 * g.r(i)).abs() < 1e-12, "ring {i}");
                assert_eq!(s.tangential[k], 0.0);
            }
        }
    }

    #[test]
    fn split_of_linear_field() {
        let g = PolarGrid::new(1.0, 80, 64).unwrap();
        let s = gradient_split(&g.sample(|r, t| r * t.cos()));
        let h2 = g.dtheta() * g.dtheta();
        for i in 0..g.nr {
            for m in 0..g.ntheta {
                let k = g.index(i, m);
                let t = g.theta(m);
                assert!((s.radial[k] - t.cos()).abs() < 1e-10);
                assert!((s.tangential[k] + t.sin()).abs() <= h2);
                assert!((s.norm_sq(i, m) - 1.0).abs() <= 2.0 * h2);
            }
        }
    }

    #[test]
    fn split_of_constant_vanishes() {
        let s = gradient_split(&grid().sample(|_, _| 4.2));
        assert!(s.radial.iter().chain(&s.tangential).all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_hypotheses_on_radial_and_constant_fields() {
        let g = grid();
        let window = [0.5, 0.6, 0.7, 0.8];
        let radial = gradient_split(&g.sample(|r, _| 1.0 / (1.05 - r)));
        let rep = check_theorem1_hypotheses(&radial, &window, 0.9, 1.0).unwrap();
        assert!(rep.ratio.iter().all(|&r| r == 0.0));
        assert!(rep.condition_i() && rep.condition_ii());

        let flat = gradient_split(&g.sample(|_, _| 3.0));
        let rep = check_theorem1_hypotheses(&flat, &window, 0.9, 1.0).unwrap();
        assert!(!rep.condition_i());

        assert!(matches!(
            check_theorem1_hypotheses(&radial, &[0.5, 0.95], 0.9, 1.0),
            Err(Error::WindowUnresolved { .. })
        ));
    }

    #[test]
    fn spectral_derivative_is_exact_for_low_modes() {
        let g = grid();
        let d = angular_derivative_spectral(&g.sample(|r, t| r * (3.0 * t).sin() + (t).cos()));
        for i in 0..g.nr {
            for m in 0..g.ntheta {
                let t = g.theta(m);
                let exact = 3.0 * g.r(i) * (3.0 * t).cos() - t.sin();
                assert!((d[g.index(i, m)] - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tangential_fit_on_linear_synthetic_field() {
        let g = PolarGrid::new(1.0, 200, 64).unwrap();
        let f = g.sample(|r, t| -(1.0 - r) * t.cos());
        let levels = [&f, &f, &f];
        let rep = lemma1_limits(&levels, 0.9, Some(0.0)).unwrap();
        let fit = rep.fit.unwrap();
        assert!((fit.exponent - 1.0).abs() <= 0.05, "{fit:?}");
        assert!((fit.c - 1.0).abs() <= 0.01, "{fit:?}");
    }

    #[test]
    fn boundary_limits_of_radial_field_vanish() {
        let g = grid();
        let fields: Vec<PolarField> = [1.0, 2.0, 4.0].iter().map(|&k| g.sample(|r, _| k / (1.05 - r))).collect();
        let refs: Vec<&PolarField> = fields.iter().collect();
        let rep = lemma1_limits(&refs, 0.9, None).unwrap();
        assert!(rep.fit.unwrap().identically_zero);
        assert!(rep.limit_i());
        assert!((rep.growth_factor - 4.0).abs() < 1e-12);
        assert!(matches!(
            lemma1_limits(&refs[..2], 0.9, None),
            Err(Error::InsufficientLadder { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn lie_bound_examples() {
        let g = grid();
        let r0 = 0.3;
        let radial = lie_derivative_bound(&g.sample(|r, _| r * r), r0, 0.95);
        assert_eq!(radial.l, 0.0);
        let synthetic = lie_derivative_bound(&g.sample(|r, t| psi(1.0, r0, r) * t.sin()), r0, 0.95);
        assert!((synthetic.l - 1.0).abs() < 1e-6, "{}", synthetic.l);
    }

    #[test]
    fn second_difference_examples() {
        let g = PolarGrid::new(1.0, 40, 64).unwrap();
        let r0 = 0.3;
        let radial = second_difference_check(&g.sample(|r, _| r * r), r0, 0.95, 1).unwrap();
        assert!(radial.pass);
        assert_eq!(radial.l_tilde, 0.0);
        let trig = second_difference_check(&g.sample(|r, t| psi(1.0, r0, r) * t.cos()), r0, 0.95, 1).unwrap();
        assert!(trig.pass, "{trig:?}");
        assert!((trig.l_tilde - 1.0).abs() < 1e-3, "{}", trig.l_tilde);
    }

    #[test]
    fn laplace_beltrami_examples() {
        let g = PolarGrid::new(1.0, 40, 64).unwrap();
        assert!(laplace_beltrami_positive_part(&g.sample(|r, _| r)).iter().all(|&v| v == 0.0));
        let lb = laplace_beltrami_positive_part(&g.sample(|r, t| t.cos() * (1.0 - r)));
        let h = g.dtheta();
        let factor = 2.0 * (1.0 - h.cos()) / (h * h);
        for (i, v) in lb.iter().enumerate() {
            assert!((v - factor * (1.0 - g.r(i))).abs() < 1e-12);
        }
        let rings: Vec<usize> = (0..g.nr).collect();
        assert!(decreasing_on(&lb, &rings, 0.0));
    }

    #[test]
    fn oscillation_examples() {
        let g = grid();
        assert!(angular_oscillation(&g.sample(|r, _| r)).iter().all(|&v| v == 0.0));
        let osc = angular_oscillation(&g.sample(|r, t| r * t.cos()));
        for (i, o) in osc.iter().enumerate() {
            assert!((o - 2.0 * g.r(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn reflection_is_an_involution() {
        let frame = MovingPlaneFrame::new(0.7, vec![0.3], 1.0).unwrap();
        let (x, y) = frame.reflect(0.3, 0.5, -0.2);
        let (bx, by) = frame.reflect(0.3, x, y);
        assert!((bx - 0.5).abs() < 1e-15 && (by + 0.2).abs() < 1e-15);
        assert_eq!(
            MovingPlaneFrame::new(0.0, vec![1.2], 1.0).unwrap_err(),
            Error::OffsetOutsideDomain(1.2)
        );
    }

    #[test]
    fn interpolation_reproduces_bilinear_data() {
        let g = grid();
        let f = g.sample(|r, _| 3.0 * r + 1.0);
        for (x, y) in [(0.3, 0.1), (-0.5, 0.4), (0.01, -0.005), (0.0, 0.0)] {
            let r: f64 = f64::hypot(x, y);
            let expect = if r < g.r(0) { 3.0 * g.r(0) + 1.0 } else { 3.0 * r + 1.0 };
            assert!((interpolate(&f, x, y) - expect).abs() < 1e-12, "({x}, {y})");
        }
    }

    #[test]
    fn radial_increasing_field_has_no_violations_in_any_direction() {
        let g = PolarGrid::new(1.0, 30, 32).unwrap();
        let f = g.sample(|r, _| r * r);
        for rep in moving_plane_fan(&f, 16).unwrap() {
            assert_eq!(rep.mu_hat, 0.0, "direction {}", rep.direction);
            assert!(rep.violations().iter().all(|&v| v <= rep.tol_grid));
            assert!(rep.consistent);
        }
    }

    #[test]
    fn off_center_bump_is_detected() {
        let g = PolarGrid::new(1.0, 30, 32).unwrap();
        let f = g.sample(|r, t| {
            let (x, y) = (r * t.cos(), r * t.sin());
            r * r + 2.0 * (-((x + 0.4).powi(2) + y * y) / 0.02).exp()
        });
        let frame = MovingPlaneFrame::uniform(&g, 0.0);
        let tol = reflection_tolerance(&f, &frame);
        let rep = moving_plane_check(&f, &frame, tol).unwrap();
        assert!(rep.mu_hat > 0.0);
        assert!(!rep.consistent);
        assert!(rep.violations().iter().any(|&v| v > tol));
    }
}
