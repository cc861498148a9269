use super::Nonlinearity;
use crate::error::{Error, Result};

/// Smallest grid point `a*` of `lo, lo + step, …` such that the centered
/// second differences of `g` are `≥ −1e-10 (1 + |g|)` at every interior grid
/// point in `[a*, hi]`. Only values on the grid are used, so tabulated data
/// is never extrapolated.
pub fn detect_convexity_threshold(g: &Nonlinearity, lo: f64, hi: f64, step: f64) -> Result<f64> {
    if !(lo < hi) || !(step > 0.0) {
        return Err(Error::InvalidInput(format!(
            "convexity scan needs lo < hi and step > 0 (got [{lo}, {hi}], step {step})"
        )));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    if count < 2 {
        return Err(Error::InvalidInput(format!(
            "convexity scan window [{lo}, {hi}] holds fewer than 3 grid points"
        )));
    }
    let values: Vec<f64> = (0..=count).map(|i| g.eval(lo + i as f64 * step)).collect();
    let convex_at = |i: usize| {
        let second = values[i + 1] - 2.0 * values[i] + values[i - 1];
        second >= -1e-10 * (1.0 + values[i].abs())
    };
    match (1..count).rev().find(|&i| !convex_at(i)) {
        None => Ok(lo),
        Some(i) if i + 1 == count => Err(Error::NotEventuallyConvex { lo, hi }),
        Some(i) => Ok(lo + (i + 1) as f64 * step),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecomposeOptions {
    /// Grid step for the splice search and the convexity scan.
    pub step: f64,
    /// Upper end of the search window.
    pub search_hi: f64,
    /// Interval over which `K0 = max |g̃|` is sampled.
    pub working_range: (f64, f64),
    pub samples: usize,
}

impl DecomposeOptions {
    pub fn for_lower_bound(a: f64) -> Self {
        Self {
            step: 0.01,
            search_hi: a + 100.0,
            working_range: (a - 1.0, a + 1.0),
            samples: 10_000,
        }
    }
}

/// `g = g∞ + g̃` with `g∞` convex and nondecreasing, `g̃ = 0` on `[M, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Splice point `M`.
    pub threshold_m: f64,
    pub slope_at_m: f64,
    /// `max |g̃|` over `working_range`.
    pub k0_bound: f64,
    pub working_range: (f64, f64),
    value_at_m: f64,
    g: Nonlinearity,
}

impl Decomposition {
    /// Splices at `m` with the one-sided slope of `g` there.
    pub fn at_splice(g: &Nonlinearity, m: f64, working_range: (f64, f64), samples: usize) -> Self {
        let slope = right_slope(g, m).max(0.0);
        let mut d = Self {
            threshold_m: m,
            slope_at_m: slope,
            k0_bound: 0.0,
            working_range,
            value_at_m: g.eval(m),
            g: g.clone(),
        };
        d.k0_bound = d.k0_over(working_range.0, working_range.1, samples);
        d
    }

    /// `g∞(s)`.
    pub fn g_inf(&self, s: f64) -> f64 {
        if s >= self.threshold_m {
            self.g.eval(s)
        } else {
            self.value_at_m + self.slope_at_m * (s - self.threshold_m)
        }
    }

    /// `g̃(s) = g(s) − g∞(s)`; exactly zero for `s ≥ M`.
    pub fn g_tilde(&self, s: f64) -> f64 {
        if s >= self.threshold_m {
            0.0
        } else {
            self.g.eval(s) - self.g_inf(s)
        }
    }

    /// `max |g̃|` over `samples + 1` equally spaced points of `[lo, hi]`.
    pub fn k0_over(&self, lo: f64, hi: f64, samples: usize) -> f64 {
        let n = samples.max(1);
        (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .map(|s| self.g_tilde(s).abs())
            .fold(0.0, f64::max)
    }

    /// Recomputes `K0` for a new working range.
    pub fn with_working_range(mut self, lo: f64, hi: f64, samples: usize) -> Self {
        self.working_range = (lo, hi);
        self.k0_bound = self.k0_over(lo, hi, samples);
        self
    }

    /// `g∞` as a nonlinearity of its own.
    pub fn convex_part(&self) -> Nonlinearity {
        Nonlinearity::spliced(self.g.clone(), self.threshold_m, self.value_at_m, self.slope_at_m)
    }

    pub fn original(&self) -> &Nonlinearity {
        &self.g
    }

    pub fn csv_header() -> &'static str {
        "threshold_m,slope_at_m,k0_bound,working_lo,working_hi"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.threshold_m, self.slope_at_m, self.k0_bound, self.working_range.0, self.working_range.1
        )
    }
}

/// Second-order forward difference quotient. For `g''' ≥ 0` it sits just
/// below `g'(m)`, so the spliced function keeps its convexity at `m`.
fn right_slope(g: &Nonlinearity, m: f64) -> f64 {
    let h = 1e-4 * (1.0 + m.abs());
    (-3.0 * g.eval(m) + 4.0 * g.eval(m + h) - g.eval(m + 2.0 * h)) / (2.0 * h)
}

pub fn decompose(g: &Nonlinearity, a: f64) -> Result<Decomposition> {
    decompose_with(g, a, &DecomposeOptions::for_lower_bound(a))
}

/// Splits `g` at the first grid point `M ≥ a` where the right slope is
/// nonnegative, after checking that `g` is convex on `[a, search_hi]`.
pub fn decompose_with(g: &Nonlinearity, a: f64, opts: &DecomposeOptions) -> Result<Decomposition> {
    let threshold = detect_convexity_threshold(g, a, opts.search_hi, opts.step)?;
    if threshold > a {
        return Err(Error::NotEventuallyConvex { lo: a, hi: opts.search_hi });
    }
    let count = ((opts.search_hi - a) / opts.step).floor() as usize;
    let m = (0..=count)
        .map(|i| a + i as f64 * opts.step)
        .find(|&s| right_slope(g, s) >= 0.0)
        .ok_or(Error::NoSplicePoint { lo: a, hi: opts.search_hi })?;
    Ok(Decomposition::at_splice(g, m, opts.working_range, opts.samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::Table;

    fn cubic() -> Nonlinearity {
        Nonlinearity::polynomial(vec![0.0, -3.0, 0.0, 1.0])
    }

    #[test]
    fn square_is_convex_everywhere() {
        let g = Nonlinearity::polynomial(vec![0.0, 0.0, 1.0]);
        assert_eq!(detect_convexity_threshold(&g, -10.0, 10.0, 0.1).unwrap(), -10.0);
    }

    #[test]
    fn cubic_turns_convex_at_zero() {
        let step = 0.1;
        let a = detect_convexity_threshold(&cubic(), -10.0, 10.0, step).unwrap();
        assert!(a.abs() <= step + 1e-12, "{a}");
    }

    #[test]
    fn tabulated_sine_is_not_eventually_convex() {
        let s: Vec<f64> = (0..=400).map(|i| i as f64 * 0.05).collect();
        let v: Vec<f64> = s.iter().map(|x| x.sin()).collect();
        let g = Nonlinearity::tabulated(Table::new(s, v).unwrap());
        assert!(matches!(
            detect_convexity_threshold(&g, 0.0, 20.0, 0.05),
            Err(Error::NotEventuallyConvex { .. })
        ));
    }

    #[test]
    fn cubic_splice_at_two() {
        let d = decompose(&cubic(), 2.0).unwrap();
        assert_eq!(d.threshold_m, 2.0);
        // g(2) = 2, g'(2) = 9: g∞(0) = 2 + 9 (0 − 2) = −16, g̃(0) = 16.
        assert!((d.g_inf(0.0) + 16.0).abs() < 1e-4);
        assert!((d.g_tilde(0.0) - 16.0).abs() < 1e-4);
    }

    #[test]
    fn cubic_splice_from_zero_takes_first_nonnegative_slope() {
        let d = decompose(&cubic(), 0.0).unwrap();
        // g'(s) = 3s² − 3 first becomes nonnegative at s = 1.
        assert!((d.threshold_m - 1.0).abs() <= 0.01 + 1e-12, "{}", d.threshold_m);
        assert!(d.slope_at_m >= 0.0);
    }

    #[test]
    fn convex_square_has_no_remainder() {
        let g = Nonlinearity::polynomial(vec![0.0, 0.0, 1.0]);
        let d = decompose(&g, 0.0).unwrap().with_working_range(0.0, 100.0, 10_000);
        assert_eq!(d.threshold_m, 0.0);
        assert_eq!(d.k0_bound, 0.0);
        assert!((0..=1000).all(|i| d.g_tilde(i as f64 * 0.1) == 0.0));
    }

    #[test]
    fn k0_bound_agrees_with_dense_sampling() {
        let d = decompose(&cubic(), 2.0).unwrap().with_working_range(-5.0, 5.0, 10_000);
        let dense = (0..=1_000_000)
            .map(|i| -5.0 + 10.0 * i as f64 / 1e6)
            .map(|s| d.g_tilde(s).abs())
            .fold(0.0, f64::max);
        assert!((d.k0_bound - dense).abs() <= 1e-3 * dense);
        // g̃(s) = (s − 2)²(s + 4) below the splice: |g̃(−5)| = 49.
        assert!((d.k0_bound - 49.0).abs() < 1e-2);
    }

    #[test]
    fn convex_part_is_convex_and_nondecreasing() {
        for a in [0.0, 2.0] {
            let d = decompose(&cubic(), a).unwrap();
            let (lo, hi) = (-5.0, 5.0);
            let n = 1000;
            let h = (hi - lo) / n as f64;
            let v: Vec<f64> = (0..=n).map(|i| d.g_inf(lo + i as f64 * h)).collect();
            for w in v.windows(3) {
                assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-10, "a = {a}");
            }
            for w in v.windows(2) {
                assert!(w[1] >= w[0] - 1e-12);
            }
            for i in 0..=n {
                let s = lo + i as f64 * h;
                if s >= d.threshold_m {
                    assert_eq!(d.g_tilde(s), 0.0);
                }
            }
        }
    }

    #[test]
    fn decreasing_function_has_no_splice() {
        let g = Nonlinearity::polynomial(vec![0.0, -1.0]);
        let opts = DecomposeOptions {
            search_hi: 10.0,
            ..DecomposeOptions::for_lower_bound(0.0)
        };
        assert!(matches!(decompose_with(&g, 0.0, &opts), Err(Error::NoSplicePoint { .. })));
    }
}
