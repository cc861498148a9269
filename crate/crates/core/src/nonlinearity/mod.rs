//! The reaction term `g` of `-Δu + g(u) = 0`.
//!
//! A [`Nonlinearity`] evaluates `g`, its derivative (for Newton Jacobians) and
//! its primitive `G(s) = ∫_a^s g`. The submodules classify `g` with the
//! Keller–Osserman integral test, locate the point beyond which `g` is convex
//! and split `g` into a convex nondecreasing part plus a bounded remainder.
//!
//! Nonlinearities have a one-line textual form: `poly:0,-3,0,1` (ascending
//! coefficients, here `u³ − 3u`), `power:2:1` (exponent then scale),
//! `exp:1` (scale) and `table:<path>` (CSV with columns `s,g`).

mod convexity;
mod ko;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub use convexity::{decompose, decompose_with, detect_convexity_threshold, DecomposeOptions, Decomposition};
pub use ko::{first_positive, keller_osserman, keller_osserman_with, ko_transform, ko_transform_with, BlowUpModel, KoOptions, KoReport};

use crate::error::{Error, Result};
use crate::numerics::adaptive_quad;

/// Piecewise-linear data, extended linearly beyond both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    s: Vec<f64>,
    g: Vec<f64>,
    source: Option<String>,
}

impl Table {
    pub fn new(s: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if s.len() != g.len() || s.len() < 2 {
            return Err(Error::Table(format!(
                "need at least two (s, g) pairs of equal length, got {} and {}",
                s.len(),
                g.len()
            )));
        }
        if let Some(w) = s.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::Table(format!(
                "breakpoints must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if s.iter().chain(&g).any(|v| !v.is_finite()) {
            return Err(Error::Table("non-finite entry".into()));
        }
        Ok(Self { s, g, source: None })
    }

    /// Reads a CSV file with header `s,g`.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Table(format!("{}: {e}", path.display())))?;
        let mut s = Vec::new();
        let mut g = Vec::new();
        for (line, record) in reader.deserialize::<(f64, f64)>().enumerate() {
            let (a, b) = record.map_err(|e| Error::Table(format!("{} row {}: {e}", path.display(), line + 2)))?;
            s.push(a);
            g.push(b);
        }
        let mut table = Self::new(s, g)?;
        table.source = Some(path.display().to_string());
        Ok(table)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.s
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.s.len();
        match self.s.partition_point(|&b| b <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    fn slope(&self, k: usize) -> f64 {
        (self.g[k + 1] - self.g[k]) / (self.s[k + 1] - self.s[k])
    }

    fn eval(&self, x: f64) -> f64 {
        let k = self.segment(x);
        self.g[k] + self.slope(k) * (x - self.s[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    /// Coefficients in ascending degree.
    Polynomial(Vec<f64>),
    /// `scale · sign(s)|s|^exponent`, the odd extension of `c s^p`.
    Power {
        exponent: f64,
        scale: f64,
    },
    /// `scale · e^s`.
    Exponential {
        scale: f64,
    },
    Tabulated(Table),
    /// `base` on `[splice, ∞)`, the line through `(splice, value)` with the
    /// given slope below it. This is the convex part built by [`decompose`].
    Spliced {
        base: Box<Nonlinearity>,
        splice: f64,
        value: f64,
        slope: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    pub kind: Kind,
    /// Interval on which [`Nonlinearity::lipschitz_constant`] samples `|g'|`.
    pub lipschitz_window: (f64, f64),
}

const DEFAULT_LIPSCHITZ_WINDOW: (f64, f64) = (0.0, 10.0);

impl Nonlinearity {
    fn from_kind(kind: Kind) -> Self {
        Self {
            kind,
            lipschitz_window: DEFAULT_LIPSCHITZ_WINDOW,
        }
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        Self::from_kind(Kind::Polynomial(coefficients))
    }

    /// `g ≡ c`.
    pub fn constant(c: f64) -> Self {
        Self::polynomial(vec![c])
    }

    pub fn power(exponent: f64, scale: f64) -> Result<Self> {
        if !(exponent > 0.0 && scale > 0.0) {
            return Err(Error::InvalidInput(format!(
                "power nonlinearity needs exponent > 0 and scale > 0 (got {exponent}, {scale})"
            )));
        }
        Ok(Self::from_kind(Kind::Power { exponent, scale }))
    }

    pub fn exponential(scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidInput(format!("exponential scale must be > 0 (got {scale})")));
        }
        Ok(Self::from_kind(Kind::Exponential { scale }))
    }

    pub fn tabulated(table: Table) -> Self {
        Self::from_kind(Kind::Tabulated(table))
    }

    pub(crate) fn spliced(base: Nonlinearity, splice: f64, value: f64, slope: f64) -> Self {
        Self::from_kind(Kind::Spliced {
            base: Box::new(base),
            splice,
            value,
            slope,
        })
    }

    pub fn with_lipschitz_window(mut self, lo: f64, hi: f64) -> Self {
        self.lipschitz_window = (lo, hi);
        self
    }

    /// `g(s)`.
    pub fn eval(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &a| acc * s + a),
            Kind::Power { exponent, scale } => scale * s.signum() * s.abs().powf(*exponent),
            Kind::Exponential { scale } => scale * s.exp(),
            Kind::Tabulated(t) => t.eval(s),
            Kind::Spliced {
                base,
                splice,
                value,
                slope,
            } => {
                if s >= *splice {
                    base.eval(s)
                } else {
                    value + slope * (s - splice)
                }
            }
        }
    }

    /// `g'(s)`; one-sided (right) at the kinks of tabulated and spliced kinds.
    pub fn derivative(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Polynomial(c) => c.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, &a)| acc * s + k as f64 * a),
            Kind::Power { exponent, scale } => {
                if s == 0.0 && *exponent < 1.0 {
                    f64::INFINITY
                } else if s == 0.0 && *exponent > 1.0 {
                    0.0
                } else {
                    scale * exponent * s.abs().powf(exponent - 1.0)
                }
            }
            Kind::Exponential { scale } => scale * s.exp(),
            Kind::Tabulated(t) => t.slope(t.segment(s)),
            Kind::Spliced { base, splice, slope, .. } => {
                if s >= *splice {
                    base.derivative(s)
                } else {
                    *slope
                }
            }
        }
    }

    /// `G(s) = ∫_a^s g(σ) dσ`, closed form except for tabulated data.
    pub fn primitive(&self, a: f64, s: f64) -> Result<f64> {
        if !(s >= a) {
            return Err(Error::InvalidInput(format!("primitive needs s >= a (got a = {a}, s = {s})")));
        }
        if s == a {
            return Ok(0.0);
        }
        Ok(match &self.kind {
            Kind::Polynomial(c) => {
                let anti = |x: f64| c.iter().enumerate().rev().fold(0.0, |acc, (k, &a)| acc * x + a / (k as f64 + 1.0)) * x;
                anti(s) - anti(a)
            }
            Kind::Power { exponent, scale } => {
                let q = exponent + 1.0;
                scale * (s.abs().powf(q) - a.abs().powf(q)) / q
            }
            Kind::Exponential { scale } => scale * (s.exp() - a.exp()),
            Kind::Tabulated(t) => {
                // Each piece between breakpoints is linear, so GK15 is exact.
                let mut cuts = vec![a];
                cuts.extend(t.s.iter().copied().filter(|&b| b > a && b < s));
                cuts.push(s);
                let mut total = 0.0;
                for w in cuts.windows(2) {
                    total += adaptive_quad(|x| t.eval(x), w[0], w[1], 1e-14)?;
                }
                total
            }
            Kind::Spliced {
                base,
                splice,
                value,
                slope,
            } => {
                let mut total = 0.0;
                if a < *splice {
                    let hi = s.min(*splice);
                    let line = |x: f64| value * x + 0.5 * slope * (x - splice) * (x - splice);
                    total += line(hi) - line(a);
                }
                if s > *splice {
                    total += base.primitive(a.max(*splice), s)?;
                }
                total
            }
        })
    }

    /// Whether `G` grows faster than every power (the tail integral then
    /// converges regardless of a power-law fit).
    pub fn is_super_polynomial(&self) -> bool {
        match &self.kind {
            Kind::Exponential { .. } => true,
            Kind::Spliced { base, .. } => base.is_super_polynomial(),
            _ => false,
        }
    }

    /// Sampled `max |g'|` over [`Nonlinearity::lipschitz_window`]; advisory.
    pub fn lipschitz_constant(&self) -> f64 {
        let (lo, hi) = self.lipschitz_window;
        let n = 1000;
        (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .map(|s| self.derivative(s).abs())
            .fold(0.0, f64::max)
    }

    /// The textual form accepted by [`FromStr`]; spliced kinds have none.
    pub fn descriptor(&self) -> Option<String> {
        match &self.kind {
            Kind::Polynomial(c) => Some(format!("poly:{}", c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))),
            Kind::Power { exponent, scale } => Some(format!("power:{exponent}:{scale}")),
            Kind::Exponential { scale } => Some(format!("exp:{scale}")),
            Kind::Tabulated(t) => t.source.as_ref().map(|p| format!("table:{p}")),
            Kind::Spliced { .. } => None,
        }
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.kind, self.descriptor()) {
            (_, Some(d)) => f.write_str(&d),
            (Kind::Tabulated(t), None) => write!(f, "table:<{} points>", t.s.len()),
            (Kind::Spliced { base, splice, slope, .. }, None) => {
                write!(f, "splice:{splice}:{slope}:{base}")
            }
            _ => unreachable!("every other kind has a descriptor"),
        }
    }
}

fn parse_f64(field: &str, descriptor: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Descriptor(descriptor.to_string()))
}

impl FromStr for Nonlinearity {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let (tag, rest) = text.split_once(':').ok_or_else(|| Error::Descriptor(text.into()))?;
        match tag {
            "poly" => {
                let coefficients = if rest.trim().is_empty() {
                    Vec::new()
                } else {
                    rest.split(',').map(|f| parse_f64(f, text)).collect::<Result<Vec<_>>>()?
                };
                Ok(Self::polynomial(coefficients))
            }
            "power" => {
                let parts: Vec<&str> = rest.split(':').collect();
                match parts.as_slice() {
                    [p] => Self::power(parse_f64(p, text)?, 1.0),
                    [p, c] => Self::power(parse_f64(p, text)?, parse_f64(c, text)?),
                    _ => Err(Error::Descriptor(text.into())),
                }
            }
            "exp" => Self::exponential(parse_f64(rest, text)?),
            "table" => Ok(Self::tabulated(Table::from_csv(rest.trim())?)),
            _ => Err(Error::Descriptor(text.into())),
        }
    }
}
