//! Keller–Osserman integral test and the blow-up coordinate
//! `ψ(u) = ∫_u^∞ ds / √(2 G(s))`.
//!
//! The improper integrals are split at a cutoff `T`: adaptive quadrature on
//! `[lower, T]` after the substitution `s = lower + t²` (which removes the
//! inverse square-root singularity of `1/√G` at `s = a`), plus an analytic
//! tail from a power-law fit `G(s) ≈ c s^q` on `[T/10, T]`. For
//! super-polynomial `G` the tail uses the local exponential rate instead.

use serde::Serialize;

use super::Nonlinearity;
use crate::error::{Error, Result};
use crate::numerics::adaptive_quad;
use crate::numerics::stencil::linear_fit;

#[derive(Debug, Clone, PartialEq)]
pub struct KoOptions {
    /// Tail cutoff `T`; default `max(1e3, 1e3 a)` (and `lower + 60` for
    /// super-polynomial kinds).
    pub cutoff: Option<f64>,
    /// The integral is declared convergent when the fitted exponent exceeds
    /// `2 + fit_margin`.
    pub fit_margin: f64,
    pub quad_tol: f64,
}

impl Default for KoOptions {
    fn default() -> Self {
        Self {
            cutoff: None,
            fit_margin: 0.05,
            quad_tol: 1e-11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KoReport {
    pub converges: bool,
    pub lower_a: f64,
    /// `∫_a^T ds/√G(s)`.
    pub finite_part: f64,
    /// Fitted `q` in `G(s) ≈ c s^q` near the cutoff.
    pub tail_exponent: f64,
    /// `∫_T^∞` under the fitted law; infinite when divergent.
    pub tail_estimate: f64,
}

impl KoReport {
    pub fn total(&self) -> f64 {
        self.finite_part + self.tail_estimate
    }

    pub fn csv_header() -> &'static str {
        "converges,lower_a,finite_part,tail_exponent,tail_estimate"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.converges, self.lower_a, self.finite_part, self.tail_exponent, self.tail_estimate
        )
    }
}

const SUPER_POLYNOMIAL_SPAN: f64 = 60.0;
const FIT_POINTS: usize = 21;
const MONOTONE_SAMPLES: usize = 400;

fn default_cutoff(g: &Nonlinearity, a: f64, lower: f64, opts: &KoOptions) -> f64 {
    if let Some(t) = opts.cutoff {
        return t.max(lower * 1.0001 + 1e-3);
    }
    if g.is_super_polynomial() {
        lower + SUPER_POLYNOMIAL_SPAN
    } else {
        1e3f64.max(1e3 * a).max(1e3 * lower)
    }
}

struct TailIntegral {
    finite: f64,
    exponent: f64,
    tail: f64,
    converges: bool,
}

/// `∫_lower^∞ ds / √(factor · G(s))` with `G` anchored at `a`.
fn inverse_sqrt_integral(g: &Nonlinearity, a: f64, lower: f64, factor: f64, opts: &KoOptions) -> Result<TailIntegral> {
    let cutoff = default_cutoff(g, a, lower, opts);
    let big_g = |s: f64| g.primitive(a, s);

    let t_max = (cutoff - lower).sqrt();
    let mut failure = None;
    let finite = adaptive_quad(
        |t| {
            let s = lower + t * t;
            match big_g(s) {
                Ok(v) if v > 0.0 => 2.0 * t / (factor * v).sqrt(),
                Ok(v) if v == f64::INFINITY => 0.0,
                Ok(v) => {
                    failure.get_or_insert(Error::NonPositivePrimitive { at: s, value: v });
                    0.0
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        t_max,
        opts.quad_tol,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }

    let g_cut = big_g(cutoff)?;
    let (exponent, tail, converges) = if g.is_super_polynomial() {
        if g_cut.is_finite() {
            let rate = g.eval(cutoff) / g_cut;
            (cutoff * rate, 2.0 / (rate * (factor * g_cut).sqrt()), true)
        } else {
            (f64::INFINITY, 0.0, true)
        }
    } else {
        let xs: Vec<f64> = (0..FIT_POINTS)
            .map(|i| cutoff / 10.0 * 10f64.powf(i as f64 / (FIT_POINTS - 1) as f64))
            .collect();
        let mut lx = Vec::with_capacity(FIT_POINTS);
        let mut ly = Vec::with_capacity(FIT_POINTS);
        for &s in &xs {
            let v = big_g(s)?;
            if !(v > 0.0) {
                return Err(Error::NonPositivePrimitive { at: s, value: v });
            }
            lx.push(s.ln());
            ly.push(v.ln());
        }
        let (q, _) = linear_fit(&lx, &ly).expect("fit points are distinct");
        let converges = q > 2.0 + opts.fit_margin;
        let tail = if converges {
            cutoff / (factor * g_cut).sqrt() / (0.5 * q - 1.0)
        } else {
            f64::INFINITY
        };
        (q, tail, converges)
    };
    Ok(TailIntegral {
        finite,
        exponent,
        tail,
        converges,
    })
}

fn check_monotone_tail(g: &Nonlinearity, a: f64, cutoff: f64) -> Result<()> {
    // Cubic spacing puts most samples near `a`, where monotonicity matters.
    let samples: Vec<f64> = (0..=MONOTONE_SAMPLES)
        .map(|i| {
            let x = i as f64 / MONOTONE_SAMPLES as f64;
            a + (cutoff - a) * x * x * x
        })
        .collect();
    let mut prev = g.eval(a);
    for &s in &samples[1..] {
        let v = g.eval(s);
        if v < prev - 1e-12 * (1.0 + prev.abs()) {
            return Err(Error::NotNondecreasing { at: s });
        }
        prev = v;
    }
    Ok(())
}

pub fn keller_osserman(g: &Nonlinearity, a: f64) -> Result<KoReport> {
    keller_osserman_with(g, a, &KoOptions::default())
}

/// Classifies `∫_a^∞ ds/√G(s)` as convergent or divergent.
pub fn keller_osserman_with(g: &Nonlinearity, a: f64, opts: &KoOptions) -> Result<KoReport> {
    let ga = g.eval(a);
    if !(ga > 0.0) {
        return Err(Error::NonPositiveAtLowerBound { a, value: ga });
    }
    let cutoff = default_cutoff(g, a, a, opts);
    check_monotone_tail(g, a, cutoff)?;
    let integral = inverse_sqrt_integral(g, a, a, 1.0, opts)?;
    Ok(KoReport {
        converges: integral.converges,
        lower_a: a,
        finite_part: integral.finite,
        tail_exponent: integral.exponent,
        tail_estimate: integral.tail,
    })
}

pub fn ko_transform(g: &Nonlinearity, a: f64, u: f64) -> Result<f64> {
    ko_transform_with(g, a, u, &KoOptions::default())
}

/// `ψ(u) = ∫_u^∞ ds / √(2 G(s))`, `G` anchored at `a`.
pub fn ko_transform_with(g: &Nonlinearity, a: f64, u: f64, opts: &KoOptions) -> Result<f64> {
    BlowUpModel::with_options(g, a, opts.clone())?.psi(u)
}

fn auto_grid() -> impl Iterator<Item = f64> {
    (0..=400).map(|i| 0.25 * i as f64)
}

/// First point of `0, 0.25, …, 100` where `g` is positive.
pub fn first_positive(g: &Nonlinearity) -> Option<f64> {
    auto_grid().find(|&a| g.eval(a) > 0.0)
}

/// Leading-order boundary blow-up: a large solution behaves like
/// `ψ⁻¹(R − r)` near `|x| = R`.
#[derive(Debug, Clone)]
pub struct BlowUpModel {
    g: Nonlinearity,
    a: f64,
    opts: KoOptions,
}

impl BlowUpModel {
    /// Fails with [`Error::KoFails`] when the tail integral diverges.
    pub fn new(g: &Nonlinearity, a: f64) -> Result<Self> {
        Self::with_options(g, a, KoOptions::default())
    }

    /// `g(a) = 0` is allowed (then `ψ(a) = ∞`); the classification is then
    /// made from the first point past `a` where `g` is positive.
    pub fn with_options(g: &Nonlinearity, a: f64, opts: KoOptions) -> Result<Self> {
        let ga = g.eval(a);
        if ga < 0.0 || ga.is_nan() {
            return Err(Error::NonPositiveAtLowerBound { a, value: ga });
        }
        let probe = if ga > 0.0 { a } else { a + 1.0 };
        if !keller_osserman_with(g, probe, &opts)?.converges {
            return Err(Error::KoFails);
        }
        Ok(Self { g: g.clone(), a, opts })
    }

    /// Anchors the model at the first point of `0, 0.25, …, 100` where `g`
    /// is positive and nondecreasing on the tail. Fails with
    /// [`Error::KoFails`] when the tail integral diverges there.
    pub fn auto(g: &Nonlinearity) -> Result<Self> {
        let mut last = Error::NonPositiveAtLowerBound {
            a: 100.0,
            value: g.eval(100.0),
        };
        for a in auto_grid().filter(|&a| g.eval(a) > 0.0) {
            match Self::new(g, a) {
                Err(Error::NotNondecreasing { at }) => last = Error::NotNondecreasing { at },
                other => return other,
            }
        }
        Err(last)
    }

    pub fn lower_bound(&self) -> f64 {
        self.a
    }

    /// `ψ(u)` for `u ≥ a`.
    pub fn psi(&self, u: f64) -> Result<f64> {
        if !(u >= self.a) {
            return Err(Error::InvalidInput(format!("ψ needs u >= a (got u = {u}, a = {})", self.a)));
        }
        if u == self.a && self.g.eval(u) <= 0.0 {
            return Ok(f64::INFINITY);
        }
        let integral = inverse_sqrt_integral(&self.g, self.a, u, 2.0, &self.opts)?;
        if !integral.converges {
            return Err(Error::KoFails);
        }
        Ok(integral.finite + integral.tail)
    }

    /// `ψ⁻¹(d)`: the level `u` whose blow-up distance is `d`. Distances
    /// beyond `ψ(a)` map to `a`.
    pub fn inverse(&self, d: f64) -> Result<f64> {
        if !(d > 0.0) {
            return Err(Error::InvalidInput(format!("ψ⁻¹ needs d > 0 (got {d})")));
        }
        if self.g.eval(self.a) > 0.0 && self.psi(self.a)? <= d {
            return Ok(self.a);
        }
        let mut lo = self.a;
        let mut hi = self.a.abs() + 1.0;
        while self.psi(hi)? > d {
            lo = hi;
            hi = 2.0 * hi + 1.0;
            if hi > 1e300 {
                return Err(Error::InvalidInput(format!("ψ⁻¹({d}) out of range")));
            }
        }
        // Safeguarded Newton with ψ'(u) = −1/√(2G(u)).
        let mut u = 0.5 * (lo + hi);
        for _ in 0..200 {
            let p = self.psi(u)? - d;
            if p > 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            let slope = -1.0 / (2.0 * self.g.primitive(self.a, u)?).sqrt();
            let mut next = u - p / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let scale = u.abs().max(1.0);
            if (next - u).abs() <= 1e-13 * scale || hi - lo <= 1e-13 * scale {
                return Ok(next);
            }
            u = next;
        }
        Ok(u)
    }
}
