//! Radial solutions of `−u'' − ((N−1)/r) u' + g(u) = 0` on balls and
//! annuli, and large solutions obtained as monotone limits of truncated
//! Dirichlet problems `u(R) = k_j`, `k_j → ∞`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::nonlinearity::{BlowUpModel, Decomposition, Nonlinearity};
use crate::numerics::stencil::gradient_1d;
use crate::numerics::{newton_solve, richardson_limit, BandedSystem, NewtonOptions, NewtonRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub dimension: usize,
    pub inner: f64,
    pub outer: f64,
    nodes: Vec<f64>,
}

impl RadialGrid {
    pub fn new(dimension: usize, inner: f64, outer: f64, n: usize) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::InvalidInput(format!("dimension must be at least 2, got {dimension}")));
        }
        if !(inner >= 0.0 && outer > inner && outer.is_finite()) {
            return Err(Error::InvalidInput(format!("need 0 <= r_in < R, got [{inner}, {outer}]")));
        }
        if n < 3 {
            return Err(Error::InvalidInput(format!("need at least 3 nodes, got {n}")));
        }
        let h = (outer - inner) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| inner + i as f64 * h).collect();
        nodes[n - 1] = outer;
        Ok(Self {
            dimension,
            inner,
            outer,
            nodes,
        })
    }

    pub fn ball(dimension: usize, radius: f64, n: usize) -> Result<Self> {
        Self::new(dimension, 0.0, radius, n)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        (self.outer - self.inner) / (self.nodes.len() - 1) as f64
    }

    pub fn is_ball(&self) -> bool {
        self.inner == 0.0
    }

    /// Linear interpolation of nodal `values` at `r` (clamped to the grid).
    pub fn interpolate(&self, values: &[f64], r: f64) -> f64 {
        let h = self.spacing();
        let x = ((r - self.inner) / h).clamp(0.0, (self.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.len() - 2);
        let t = x - i as f64;
        if t == 0.0 {
            values[i]
        } else {
            (1.0 - t) * values[i] + t * values[i + 1]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerCondition {
    NeumannZero,
    Dirichlet(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialSolution {
    pub grid: RadialGrid,
    pub values: Vec<f64>,
    pub boundary_k: f64,
    pub derivative: Vec<f64>,
    pub newton: NewtonRecord,
}

impl RadialSolution {
    pub fn value_at(&self, r: f64) -> f64 {
        self.grid.interpolate(&self.values, r)
    }
}

fn residual(g: &Nonlinearity, grid: &RadialGrid, k: f64, inner: InnerCondition, u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let h = grid.spacing();
    let h2 = h * h;
    let nm1 = (grid.dimension - 1) as f64;
    let r = grid.nodes();
    let mut f = vec![0.0; n];
    f[0] = match inner {
        InnerCondition::NeumannZero => -2.0 * grid.dimension as f64 * (u[1] - u[0]) + h2 * g.eval(u[0]),
        InnerCondition::Dirichlet(m) => u[0] - m,
    };
    for i in 1..n - 1 {
        let c = nm1 * h / (2.0 * r[i]);
        f[i] = -(u[i + 1] - 2.0 * u[i] + u[i - 1]) - c * (u[i + 1] - u[i - 1]) + h2 * g.eval(u[i]);
    }
    f[n - 1] = u[n - 1] - k;
    f
}

fn jacobian(g: &Nonlinearity, grid: &RadialGrid, inner: InnerCondition, u: &[f64]) -> BandedSystem {
    let n = u.len();
    let h = grid.spacing();
    let h2 = h * h;
    let nm1 = (grid.dimension - 1) as f64;
    let r = grid.nodes();
    let mut jac = BandedSystem::new(n, 1, 1).expect("radial grids have at least 3 nodes");
    match inner {
        InnerCondition::NeumannZero => {
            let two_n = 2.0 * grid.dimension as f64;
            jac.set(0, 0, two_n + h2 * g.derivative(u[0]));
            jac.set(0, 1, -two_n);
        }
        InnerCondition::Dirichlet(_) => jac.set(0, 0, 1.0),
    }
    for i in 1..n - 1 {
        let c = nm1 * h / (2.0 * r[i]);
        jac.set(i, i - 1, -1.0 + c);
        jac.set(i, i, 2.0 + h2 * g.derivative(u[i]));
        jac.set(i, i + 1, -1.0 - c);
    }
    jac.set(n - 1, n - 1, 1.0);
    jac
}

/// Newton tolerance for the `h²`-scaled rows: `tol` is relative to the size
/// of the boundary data in PDE units, floored at the rounding level of a
/// stencil whose coefficients sum to `weight` in absolute value.
pub(crate) fn scaled_tolerance(tol: f64, h: f64, scale: f64, weight: f64) -> f64 {
    (tol * h * h).max(16.0 * weight * f64::EPSILON) * scale.max(1.0)
}

fn scaled_options(newton: &NewtonOptions, grid: &RadialGrid, k: f64, inner: InnerCondition) -> NewtonOptions {
    let scale = match inner {
        InnerCondition::Dirichlet(m) => k.abs().max(m.abs()),
        InnerCondition::NeumannZero => k.abs(),
    };
    NewtonOptions {
        tol: scaled_tolerance(newton.tol, grid.spacing(), scale, 4.0 * grid.dimension as f64),
        ..newton.clone()
    }
}

fn initial_guess(grid: &RadialGrid, k: f64, inner: InnerCondition) -> Vec<f64> {
    match inner {
        InnerCondition::NeumannZero => vec![k; grid.len()],
        InnerCondition::Dirichlet(m) => {
            let span = grid.outer - grid.inner;
            grid.nodes().iter().map(|&r| m + (k - m) * (r - grid.inner) / span).collect()
        }
    }
}

pub fn solve_truncated_radial(g: &Nonlinearity, grid: &RadialGrid, boundary_k: f64, inner: InnerCondition) -> Result<RadialSolution> {
    solve_truncated_radial_with(g, grid, boundary_k, inner, None, &NewtonOptions::default())
}

/// Second-order finite differences for `u(R) = k` with the given inner
/// condition; at the pole `Δu → N u''(0)` with the mirror ghost `u_{−1} = u_1`.
/// `newton.tol` applies to the unscaled equation, relative to `max(1, |k|)`.
pub fn solve_truncated_radial_with(
    g: &Nonlinearity,
    grid: &RadialGrid,
    boundary_k: f64,
    inner: InnerCondition,
    init: Option<Vec<f64>>,
    newton: &NewtonOptions,
) -> Result<RadialSolution> {
    match inner {
        InnerCondition::NeumannZero if !grid.is_ball() => return Err(Error::InvalidInput("Neumann inner condition needs a ball".into())),
        InnerCondition::Dirichlet(_) if grid.is_ball() => return Err(Error::InvalidPoleCondition),
        _ => {}
    }
    let init = match init {
        Some(v) if v.len() != grid.len() => {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: v.len(),
            })
        }
        Some(mut v) => {
            let n = v.len();
            v[n - 1] = boundary_k;
            if let InnerCondition::Dirichlet(m) = inner {
                v[0] = m;
            }
            v
        }
        None => initial_guess(grid, boundary_k, inner),
    };
    let opts = scaled_options(newton, grid, boundary_k, inner);
    let (values, record) = newton_solve(
        |u| residual(g, grid, boundary_k, inner, u),
        |u| jacobian(g, grid, inner, u),
        init,
        &opts,
    )?;
    let derivative = gradient_1d(&values, grid.spacing());
    Ok(RadialSolution {
        grid: grid.clone(),
        values,
        boundary_k,
        derivative,
        newton: record,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderOptions {
    pub k0: f64,
    pub ratio: f64,
    pub levels: usize,
    /// Convergence is judged on `r ≤ R − interior_margin`.
    pub interior_margin: f64,
    /// Relative change between the last two levels below which the interior
    /// is declared converged.
    pub tol: f64,
    pub newton: NewtonOptions,
    /// Anchor of the blow-up model; chosen by [`BlowUpModel::auto`] if unset.
    pub ko_lower: Option<f64>,
}

impl Default for LadderOptions {
    fn default() -> Self {
        Self {
            k0: 10.0,
            ratio: 4.0,
            levels: 6,
            interior_margin: 0.1,
            tol: 1e-3,
            newton: NewtonOptions::default(),
            ko_lower: None,
        }
    }
}

impl LadderOptions {
    pub fn schedule(&self) -> Vec<f64> {
        (0..self.levels).map(|j| self.k0 * self.ratio.powi(j as i32)).collect()
    }

    fn validate(&self, needed: usize) -> Result<()> {
        if !(self.k0 > 0.0 && self.ratio > 1.0 && self.tol > 0.0 && self.interior_margin >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "ladder needs k0 > 0, ratio > 1, tol > 0, margin >= 0 (got k0 = {}, ratio = {}, tol = {}, margin = {})",
                self.k0, self.ratio, self.tol, self.interior_margin
            )));
        }
        if self.levels < needed {
            return Err(Error::InsufficientLadder { needed, got: self.levels });
        }
        Ok(())
    }
}

/// Levels required by [`large_solution_radial`].
pub const MIN_LEVELS: usize = 4;
/// Relative agreement with the blow-up model that defines the match radius.
pub const MATCH_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct LargeRadialProfile {
    /// Truncated solutions, one per boundary level.
    pub ladder: Vec<RadialSolution>,
    /// Richardson limit in `1/k` over the last three levels; `+∞` where the
    /// levels do not converge.
    pub extrapolated: Vec<f64>,
    pub extrapolation_error: Vec<f64>,
    pub model: BlowUpModel,
    /// `ψ⁻¹(R − r)` at the nodes (`+∞` at `r = R`).
    pub model_values: Vec<f64>,
    /// Largest node where the extrapolated profile agrees with the model to
    /// [`MATCH_TOLERANCE`].
    pub match_radius: Option<f64>,
    /// Relative change between the last two levels on the interior region.
    pub interior_change: f64,
    pub interior_converged: bool,
    pub interior_margin: f64,
}

impl LargeRadialProfile {
    pub fn top(&self) -> &RadialSolution {
        self.ladder.last().expect("ladders are nonempty")
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.top().grid
    }

    /// Extrapolated values up to the match radius, the blow-up model beyond.
    pub fn matched_profile(&self) -> Vec<f64> {
        let cut = self.match_radius.unwrap_or(f64::NEG_INFINITY);
        self.grid()
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &r)| if r <= cut { self.extrapolated[i] } else { self.model_values[i] })
            .collect()
    }

    /// The matched profile at any `r ∈ [r_in, R)`.
    pub fn matched_value(&self, r: f64) -> Result<f64> {
        let grid = self.grid();
        if !(r >= grid.inner && r < grid.outer) {
            return Err(Error::InvalidInput(format!("radius {r} outside [{}, {})", grid.inner, grid.outer)));
        }
        match self.match_radius {
            Some(cut) if r <= cut => Ok(grid.interpolate(&self.extrapolated, r)),
            _ => self.model.inverse(grid.outer - r),
        }
    }

    /// Fitted exponent of `u` against `R − r` over the last resolved decade
    /// `R − r ∈ [R − r_match, 10 (R − r_match)]`.
    pub fn blow_up_exponent(&self) -> Option<f64> {
        let cut = self.match_radius?;
        let grid = self.grid();
        let d_lo = grid.outer - cut;
        let d_hi = (10.0 * d_lo).min(grid.outer - grid.inner);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for (i, &r) in grid.nodes().iter().enumerate() {
            let d = grid.outer - r;
            let v = self.extrapolated[i];
            if d >= d_lo * (1.0 - 1e-12) && d <= d_hi && v > 0.0 && v.is_finite() {
                x.push(d.ln());
                y.push(v.ln());
            }
        }
        crate::numerics::stencil::linear_fit(&x, &y).map(|(slope, _)| slope)
    }

    /// `r,u,du_dr,k_level` rows for every level of the ladder.
    pub fn profile_csv(&self) -> String {
        let mut out = String::from("r,u,du_dr,k_level\n");
        for sol in &self.ladder {
            for ((r, u), du) in sol.grid.nodes().iter().zip(&sol.values).zip(&sol.derivative) {
                let _ = writeln!(out, "{r},{u},{du},{}", sol.boundary_k);
            }
        }
        out
    }

    /// `r,u_model` rows for `r < R`.
    pub fn asymptote_csv(&self) -> String {
        let mut out = String::from("r,u_model\n");
        for (r, u) in self.grid().nodes().iter().zip(&self.model_values) {
            if u.is_finite() {
                let _ = writeln!(out, "{r},{u}");
            }
        }
        out
    }
}

fn model_for(g: &Nonlinearity, opts: &LadderOptions) -> Result<BlowUpModel> {
    let model = match opts.ko_lower {
        Some(a) => BlowUpModel::new(g, a),
        None => BlowUpModel::auto(g),
    };
    model.map_err(|e| if e == Error::KoFails { Error::KoViolated } else { e })
}

fn run_ladder(g: &Nonlinearity, grid: &RadialGrid, inner: InnerCondition, opts: &LadderOptions) -> Result<LargeRadialProfile> {
    opts.validate(MIN_LEVELS)?;
    let model = model_for(g, opts)?;
    let mut ladder: Vec<RadialSolution> = Vec::with_capacity(opts.levels);
    for (level, k) in opts.schedule().into_iter().enumerate() {
        let init = ladder.last().map(|s| s.values.clone());
        let sol = solve_truncated_radial_with(g, grid, k, inner, init, &opts.newton).map_err(|e| e.at_level(level))?;
        if let Some(prev) = ladder.last() {
            check_monotone(&prev.values, &sol.values, level)?;
        }
        ladder.push(sol);
    }

    let n = grid.len();
    let top = &ladder[ladder.len() - 1];
    let below = &ladder[ladder.len() - 2];
    let interior_limit = grid.outer - opts.interior_margin;
    let interior_change = grid
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, &r)| r <= interior_limit)
        .map(|(i, _)| (top.values[i] - below.values[i]).abs() / top.values[i].abs().max(1.0))
        .fold(0.0, f64::max);

    let last3 = &ladder[ladder.len() - 3..];
    let mut extrapolated = vec![f64::INFINITY; n];
    let mut extrapolation_error = vec![f64::INFINITY; n];
    for i in 0..n {
        let samples: Vec<(f64, f64)> = last3.iter().map(|s| (1.0 / s.boundary_k, s.values[i])).collect();
        if let Some((v, e)) = resolved_limit(&samples) {
            extrapolated[i] = v;
            extrapolation_error[i] = e;
        }
    }
    extrapolated[n - 1] = f64::INFINITY;
    extrapolation_error[n - 1] = f64::INFINITY;

    let mut model_values = Vec::with_capacity(n);
    for &r in grid.nodes() {
        let d = grid.outer - r;
        model_values.push(if d > 0.0 { model.inverse(d)? } else { f64::INFINITY });
    }
    let match_radius = grid
        .nodes()
        .iter()
        .enumerate()
        .rev()
        .find(|&(i, _)| {
            let (v, m) = (extrapolated[i], model_values[i]);
            v.is_finite() && m.is_finite() && (v - m).abs() <= MATCH_TOLERANCE * m.abs()
        })
        .map(|(_, &r)| r);

    Ok(LargeRadialProfile {
        ladder,
        extrapolated,
        extrapolation_error,
        model,
        model_values,
        match_radius,
        interior_change,
        interior_converged: interior_change < opts.tol,
        interior_margin: opts.interior_margin,
    })
}

/// Slowest decay in `1/k` accepted as resolved, and the largest relative
/// extrapolation error.
const MIN_ORDER: f64 = 0.25;
const MAX_RELATIVE_ERROR: f64 = 0.05;

fn resolved_limit(samples: &[(f64, f64)]) -> Option<(f64, f64)> {
    let est = richardson_limit(samples).ok()?;
    if est.order.is_some_and(|q| q < MIN_ORDER) || est.error > MAX_RELATIVE_ERROR * est.limit.abs().max(1.0) {
        return None;
    }
    Some((est.limit, est.error))
}

/// Node-wise `previous ≤ current` up to rounding.
pub(crate) fn check_monotone(previous: &[f64], current: &[f64], level: usize) -> Result<()> {
    for (node, (&p, &c)) in previous.iter().zip(current).enumerate() {
        if c < p - 1e-10 * p.abs().max(1.0) {
            return Err(Error::NotMonotone {
                level,
                node,
                previous: p,
                current: c,
            });
        }
    }
    Ok(())
}

/// Large solution on a ball as the monotone limit of `u(R) = k_j`.
pub fn large_solution_radial(g: &Nonlinearity, grid: &RadialGrid, opts: &LadderOptions) -> Result<LargeRadialProfile> {
    if !grid.is_ball() {
        return Err(Error::InvalidInput(
            "large_solution_radial needs a ball; use solve_annulus_large".into(),
        ));
    }
    run_ladder(g, grid, InnerCondition::NeumannZero, opts)
}

/// Large solution of the convex part `g∞`, the reference profile `U_R`.
pub fn reference_u_r(decomp: &Decomposition, grid: &RadialGrid, opts: &LadderOptions) -> Result<LargeRadialProfile> {
    large_solution_radial(&decomp.convex_part(), grid, opts)
}

/// Annulus `r₀ < r < R` with `u(r₀) = inner_value` and blow-up at `R`.
pub fn solve_annulus_large(g: &Nonlinearity, grid: &RadialGrid, inner_value: f64, opts: &LadderOptions) -> Result<LargeRadialProfile> {
    if grid.is_ball() {
        return Err(Error::InvalidPoleCondition);
    }
    run_ladder(g, grid, InnerCondition::Dirichlet(inner_value), opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxReport {
    /// Interior nodes `r_1 … r_{n−2}`.
    pub radii: Vec<f64>,
    /// Discrete `(r^{N−1} u')'`.
    pub flux_derivative: Vec<f64>,
    /// `r^{N−1} g∞(u)`.
    pub source: Vec<f64>,
}

impl FluxReport {
    pub fn difference(&self) -> Vec<f64> {
        self.flux_derivative.iter().zip(&self.source).map(|(f, s)| f - s).collect()
    }

    /// Largest `source − flux_derivative` over nodes with `r ≥ r_min`
    /// (negative or zero when the flux dominates).
    pub fn worst_deficit(&self, r_min: f64) -> f64 {
        self.radii
            .iter()
            .zip(self.difference())
            .filter(|(&r, _)| r >= r_min)
            .map(|(_, d)| -d)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(r^{N−1}u')' ≥ r^{N−1} g∞(u) − allowance` for all `r ≥ r_min`.
    pub fn dominates(&self, r_min: f64, allowance: f64) -> bool {
        self.worst_deficit(r_min) <= allowance
    }
}

/// Conservative flux derivative of a truncated solution against
/// `r^{N−1} g∞(u)`.
pub fn radial_flux_check(solution: &RadialSolution, g_inf: &Nonlinearity) -> FluxReport {
    let grid = &solution.grid;
    let u = &solution.values;
    let h = grid.spacing();
    let p = (grid.dimension - 1) as i32;
    let r = grid.nodes();
    let n = u.len();
    let mut report = FluxReport {
        radii: Vec::with_capacity(n - 2),
        flux_derivative: Vec::with_capacity(n - 2),
        source: Vec::with_capacity(n - 2),
    };
    for i in 1..n - 1 {
        let right = (r[i] + 0.5 * h).powi(p) * (u[i + 1] - u[i]);
        let left = (r[i] - 0.5 * h).powi(p) * (u[i] - u[i - 1]);
        report.radii.push(r[i]);
        report.flux_derivative.push((right - left) / (h * h));
        report.source.push(r[i].powi(p) * g_inf.eval(u[i]));
    }
    report
}
