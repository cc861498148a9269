//! Full two-dimensional solver for `−Δu + g(u) = 0` on a disk with
//! angle-dependent Dirichlet data, the blow-up ladder, the barriers `φ` and
//! `Ψ`, and the sandwich check against the convex reference `U_R`.
//!
//! Unknowns live on a staggered polar grid `r_i = (i + ½) R / Nr`,
//! `θ_m = 2πm / Nθ`, ordered ring by ring (`index = i·Nθ + m`). With that
//! ordering the radial, angular and periodic-wrap couplings all sit within
//! `Nθ` of the diagonal, so the Jacobian is a plain banded matrix.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nonlinearity::{BlowUpModel, Decomposition, Nonlinearity};
use crate::numerics::{newton_solve, BandedSystem, NewtonOptions, NewtonRecord};
use crate::radial::{check_monotone, scaled_tolerance, LadderOptions, LargeRadialProfile};

#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid {
    pub radius: f64,
    pub nr: usize,
    pub ntheta: usize,
}

impl PolarGrid {
    pub fn new(radius: f64, nr: usize, ntheta: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
        }
        if nr < 3 {
            return Err(Error::InvalidInput(format!("need at least 3 rings, got {nr}")));
        }
        if ntheta < 4 || !ntheta.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!("angular count must be even and >= 4, got {ntheta}")));
        }
        Ok(Self { radius, nr, ntheta })
    }

    pub fn len(&self) -> usize {
        self.nr * self.ntheta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dr(&self) -> f64 {
        self.radius / self.nr as f64
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.ntheta as f64
    }

    pub fn r(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dr()
    }

    pub fn theta(&self, m: usize) -> f64 {
        m as f64 * self.dtheta()
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.nr).map(|i| self.r(i)).collect()
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.ntheta).map(|m| self.theta(m)).collect()
    }

    #[inline]
    pub fn index(&self, i: usize, m: usize) -> usize {
        i * self.ntheta + m
    }

    /// Angular index shifted by `shift` steps with wraparound.
    #[inline]
    pub fn wrap(&self, m: usize, shift: isize) -> usize {
        (m as isize + shift).rem_euclid(self.ntheta as isize) as usize
    }

    /// Angular index of `θ_m + π`.
    #[inline]
    pub fn opposite(&self, m: usize) -> usize {
        (m + self.ntheta / 2) % self.ntheta
    }

    /// Samples `f(r, θ)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> PolarField {
        let mut values = Vec::with_capacity(self.len());
        for i in 0..self.nr {
            let r = self.r(i);
            for m in 0..self.ntheta {
                values.push(f(r, self.theta(m)));
            }
        }
        PolarField {
            grid: self.clone(),
            values,
        }
    }

    /// Samples a boundary datum `k(θ)` at the grid angles.
    pub fn boundary(&self, k: impl Fn(f64) -> f64) -> Vec<f64> {
        self.thetas().into_iter().map(k).collect()
    }
}

/// Nodal values on a [`PolarGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolarField {
    pub grid: PolarGrid,
    pub values: Vec<f64>,
}

impl PolarField {
    pub fn new(grid: PolarGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    #[inline]
    pub fn at(&self, i: usize, m: usize) -> f64 {
        self.values[self.grid.index(i, m)]
    }

    pub fn ring(&self, i: usize) -> &[f64] {
        let n = self.grid.ntheta;
        &self.values[i * n..(i + 1) * n]
    }

    pub fn ring_mean(&self, i: usize) -> f64 {
        self.ring(i).iter().sum::<f64>() / self.grid.ntheta as f64
    }

    /// `max_m u − min_m u` on ring `i`.
    pub fn oscillation(&self, i: usize) -> f64 {
        let ring = self.ring(i);
        let max = ring.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = ring.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }

    /// Values at radius `r` for every grid angle, linear between rings.
    pub fn ring_values_at(&self, r: f64) -> Vec<f64> {
        let g = &self.grid;
        let x = (r / g.dr() - 0.5).clamp(0.0, (g.nr - 1) as f64);
        let i = (x.floor() as usize).min(g.nr - 2);
        let t = x - i as f64;
        (0..g.ntheta)
            .map(|m| {
                if t == 0.0 {
                    self.at(i, m)
                } else {
                    (1.0 - t) * self.at(i, m) + t * self.at(i + 1, m)
                }
            })
            .collect()
    }

    pub fn oscillation_at(&self, r: f64) -> f64 {
        let v = self.ring_values_at(r);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }

    pub fn mean_at(&self, r: f64) -> f64 {
        let v = self.ring_values_at(r);
        v.iter().sum::<f64>() / v.len() as f64
    }

    /// `r,theta,u` rows.
    pub fn csv(&self) -> String {
        let mut out = String::from("r,theta,u\n");
        for i in 0..self.grid.nr {
            let r = self.grid.r(i);
            for m in 0..self.grid.ntheta {
                let _ = writeln!(out, "{r},{},{}", self.grid.theta(m), self.at(i, m));
            }
        }
        out
    }

    /// Rotates by `q` angular steps: the result at `θ_m` is this field at
    /// `θ_{m−q}`.
    pub fn rotated(&self, q: isize) -> PolarField {
        let g = &self.grid;
        let mut values = vec![0.0; g.len()];
        for i in 0..g.nr {
            for m in 0..g.ntheta {
                values[g.index(i, m)] = self.at(i, g.wrap(m, -q));
            }
        }
        PolarField { grid: g.clone(), values }
    }

    /// Restriction of a field on the grid with `2 Nr` rings (same `Nθ`) to
    /// this grid: each coarse ring sits midway between two fine rings.
    pub fn restrict_from(fine: &PolarField, coarse: &PolarGrid) -> Result<PolarField> {
        let f = &fine.grid;
        if f.nr != 2 * coarse.nr || f.ntheta != coarse.ntheta || f.radius != coarse.radius {
            return Err(Error::InvalidInput(format!(
                "restriction needs a fine grid with 2·{} rings and {} angles",
                coarse.nr, coarse.ntheta
            )));
        }
        let values = (0..coarse.nr)
            .flat_map(|i| (0..coarse.ntheta).map(move |m| (i, m)))
            .map(|(i, m)| 0.5 * (fine.at(2 * i, m) + fine.at(2 * i + 1, m)))
            .collect();
        PolarField::new(coarse.clone(), values)
    }
}

/// Five-point polar operator `h_r² Δ_h u` for `u` with outer Dirichlet data
/// (ghost `2k − u`). The inner ghost across the pole would be the value at
/// `θ + π` on the first ring, but its flux weight `r_{−½} = 0` vanishes.
fn scaled_laplacian(grid: &PolarGrid, boundary: &[f64], u: &[f64]) -> Vec<f64> {
    let (nr, nt) = (grid.nr, grid.ntheta);
    let h = grid.dr();
    let ht2 = grid.dtheta() * grid.dtheta();
    let mut out = vec![0.0; grid.len()];
    for i in 0..nr {
        let r = grid.r(i);
        let c_out = (r + 0.5 * h) / r;
        let c_in = (r - 0.5 * h) / r;
        let c_ang = h * h / (r * r * ht2);
        for m in 0..nt {
            let k = grid.index(i, m);
            let c = u[k];
            let outer = if i + 1 < nr { u[k + nt] } else { 2.0 * boundary[m] - c };
            let inner = if i > 0 { u[k - nt] } else { c };
            let left = u[grid.index(i, grid.wrap(m, -1))];
            let right = u[grid.index(i, grid.wrap(m, 1))];
            out[k] = c_out * (outer - c) - c_in * (c - inner) + c_ang * (right - 2.0 * c + left);
        }
    }
    out
}

/// Discrete Laplacian `Δ_h u` (unscaled) with outer Dirichlet data.
pub fn discrete_laplacian(field: &PolarField, boundary: &[f64]) -> Result<Vec<f64>> {
    check_boundary(&field.grid, boundary)?;
    let h2 = field.grid.dr() * field.grid.dr();
    Ok(scaled_laplacian(&field.grid, boundary, &field.values)
        .into_iter()
        .map(|v| v / h2)
        .collect())
}

fn check_boundary(grid: &PolarGrid, boundary: &[f64]) -> Result<()> {
    if boundary.len() != grid.ntheta {
        return Err(Error::DimensionMismatch {
            expected: grid.ntheta,
            got: boundary.len(),
        });
    }
    Ok(())
}

/// Residual `h_r² (−Δ_h u + g(u))` and its exact Jacobian.
pub fn assemble_system(g: &Nonlinearity, grid: &PolarGrid, boundary: &[f64], state: &[f64]) -> Result<(Vec<f64>, BandedSystem)> {
    check_boundary(grid, boundary)?;
    if state.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: state.len(),
        });
    }
    Ok((residual(g, grid, boundary, state), jacobian(g, grid, state)))
}

fn residual(g: &Nonlinearity, grid: &PolarGrid, boundary: &[f64], u: &[f64]) -> Vec<f64> {
    let h2 = grid.dr() * grid.dr();
    let mut f = scaled_laplacian(grid, boundary, u);
    for (fk, &uk) in f.iter_mut().zip(u) {
        *fk = -*fk + h2 * g.eval(uk);
    }
    f
}

fn jacobian(g: &Nonlinearity, grid: &PolarGrid, u: &[f64]) -> BandedSystem {
    let (nr, nt) = (grid.nr, grid.ntheta);
    let h = grid.dr();
    let ht2 = grid.dtheta() * grid.dtheta();
    let mut jac = BandedSystem::new(grid.len(), nt, nt).expect("polar grids have at least 12 nodes");
    for i in 0..nr {
        let r = grid.r(i);
        let c_out = (r + 0.5 * h) / r;
        let c_in = if i > 0 { (r - 0.5 * h) / r } else { 0.0 };
        let c_ang = h * h / (r * r * ht2);
        let outer_diag = if i + 1 < nr { c_out } else { 2.0 * c_out };
        for m in 0..nt {
            let k = grid.index(i, m);
            jac.set(k, k, outer_diag + c_in + 2.0 * c_ang + h * h * g.derivative(u[k]));
            if i + 1 < nr {
                jac.set(k, k + nt, -c_out);
            }
            if i > 0 {
                jac.set(k, k - nt, -c_in);
            }
            jac.add(k, grid.index(i, grid.wrap(m, -1)), -c_ang);
            jac.add(k, grid.index(i, grid.wrap(m, 1)), -c_ang);
        }
    }
    jac
}

/// Largest absolute coefficient sum of a scaled stencil row (attained on
/// the innermost ring, where the angular weight peaks).
fn stencil_weight(grid: &PolarGrid) -> f64 {
    let h = grid.dr();
    let r = grid.r(0);
    let c_ang = h * h / (r * r * grid.dtheta() * grid.dtheta());
    2.0 * ((r + 0.5 * h) / r + 2.0 * c_ang)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiskSolution {
    pub field: PolarField,
    pub boundary: Vec<f64>,
    pub newton: NewtonRecord,
    pub level: usize,
}

impl DiskSolution {
    pub fn grid(&self) -> &PolarGrid {
        &self.field.grid
    }

    /// Largest boundary value.
    pub fn boundary_level(&self) -> f64 {
        self.boundary.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Newton on the assembled system. `newton.tol` applies to the unscaled
/// equation relative to `max(1, max|k|)`. Without `init` the iteration
/// starts from the ring-constant mean of the boundary data.
pub fn solve_dirichlet_disk(
    g: &Nonlinearity,
    grid: &PolarGrid,
    boundary: &[f64],
    init: Option<Vec<f64>>,
    newton: &NewtonOptions,
) -> Result<DiskSolution> {
    check_boundary(grid, boundary)?;
    let init = match init {
        Some(v) if v.len() != grid.len() => {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: v.len(),
            })
        }
        Some(v) => v,
        None => vec![boundary.iter().sum::<f64>() / boundary.len() as f64; grid.len()],
    };
    let scale = boundary.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let opts = NewtonOptions {
        tol: scaled_tolerance(newton.tol, grid.dr(), scale, stencil_weight(grid)),
        ..newton.clone()
    };
    let (values, record) = newton_solve(|u| residual(g, grid, boundary, u), |u| jacobian(g, grid, u), init, &opts)?;
    Ok(DiskSolution {
        field: PolarField {
            grid: grid.clone(),
            values,
        },
        boundary: boundary.to_vec(),
        newton: record,
        level: 0,
    })
}

/// Angular profile `s(θ)` of the boundary perturbation, `max |s| ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Cos(u32),
    Sin(u32),
}

impl Shape {
    pub fn eval(&self, theta: f64) -> f64 {
        match *self {
            Shape::Cos(n) => (n as f64 * theta).cos(),
            Shape::Sin(n) => (n as f64 * theta).sin(),
        }
    }
}

impl Default for Shape {
    fn default() -> Self {
        Shape::Cos(3)
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shape::Cos(n) => write!(f, "cos{n}"),
            Shape::Sin(n) => write!(f, "sin{n}"),
        }
    }
}

impl FromStr for Shape {
    type Err = Error;

    /// `cos<n>` or `sin<n>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unknown shape `{s}` (expected cos<n> or sin<n>)"));
        let (ctor, rest): (fn(u32) -> Shape, &str) = if let Some(rest) = s.strip_prefix("cos") {
            (Shape::Cos, rest)
        } else if let Some(rest) = s.strip_prefix("sin") {
            (Shape::Sin, rest)
        } else {
            return Err(bad());
        };
        rest.parse().map(ctor).map_err(|_| bad())
    }
}

#[derive(Debug, Clone)]
pub struct DiskLadder {
    pub levels: Vec<DiskSolution>,
    pub ks: Vec<f64>,
    pub epsilon: f64,
    pub shape: Shape,
    pub interior_change: f64,
    pub interior_converged: bool,
}

impl DiskLadder {
    pub fn top(&self) -> &DiskSolution {
        self.levels.last().expect("ladders are nonempty")
    }

    pub fn bottom(&self) -> &DiskSolution {
        &self.levels[0]
    }

    /// Angular oscillation at radius `r` for every level.
    pub fn oscillation_at(&self, r: f64) -> Vec<f64> {
        self.levels.iter().map(|s| s.field.oscillation_at(r)).collect()
    }

    /// `level,k,osc_at_half_R,newton_iters,converged` rows.
    pub fn csv(&self) -> String {
        let mut out = String::from("level,k,osc_at_half_R,newton_iters,converged\n");
        for (sol, k) in self.levels.iter().zip(&self.ks) {
            let half = 0.5 * sol.grid().radius;
            let _ = writeln!(
                out,
                "{},{k},{},{},{}",
                sol.level,
                sol.field.oscillation_at(half),
                sol.newton.iterations,
                sol.newton.converged
            );
        }
        out
    }
}

/// Warm-started ladder with boundary data `k_j (1 + ε s(θ))`.
/// Node-wise monotonicity in `j` is enforced when `ε = 0`.
pub fn continuation_to_blowup(g: &Nonlinearity, grid: &PolarGrid, shape: Shape, epsilon: f64, opts: &LadderOptions) -> Result<DiskLadder> {
    if !(epsilon >= 0.0) || epsilon >= 1.0 {
        return Err(Error::InvalidInput(format!("epsilon must lie in [0, 1), got {epsilon}")));
    }
    if opts.levels == 0 || !(opts.k0 > 0.0 && opts.ratio > 1.0) {
        return Err(Error::InvalidInput("ladder needs at least one level, k0 > 0 and ratio > 1".into()));
    }
    let model = match opts.ko_lower {
        Some(a) => BlowUpModel::new(g, a),
        None => BlowUpModel::auto(g),
    };
    match model {
        Err(Error::KoFails) => return Err(Error::KoViolated),
        Err(e) => return Err(e),
        Ok(_) => {}
    }
    let ks = opts.schedule();
    let mut levels: Vec<DiskSolution> = Vec::with_capacity(ks.len());
    for (level, &k) in ks.iter().enumerate() {
        let boundary = grid.boundary(|t| k * (1.0 + epsilon * shape.eval(t)));
        let init = levels.last().map(|s| s.field.values.clone());
        let mut sol = solve_dirichlet_disk(g, grid, &boundary, init, &opts.newton).map_err(|e| e.at_level(level))?;
        sol.level = level;
        if epsilon == 0.0 {
            if let Some(prev) = levels.last() {
                check_monotone(&prev.field.values, &sol.field.values, level)?;
            }
        }
        levels.push(sol);
    }
    let interior_change = match levels.len() {
        1 => f64::INFINITY,
        n => {
            let (top, below) = (&levels[n - 1].field, &levels[n - 2].field);
            let limit = grid.radius - opts.interior_margin;
            (0..grid.nr)
                .filter(|&i| grid.r(i) <= limit)
                .flat_map(|i| (0..grid.ntheta).map(move |m| grid.index(i, m)))
                .map(|k| (top.values[k] - below.values[k]).abs() / top.values[k].abs().max(1.0))
                .fold(0.0, f64::max)
        }
    };
    Ok(DiskLadder {
        levels,
        ks,
        epsilon,
        shape,
        interior_change,
        interior_converged: interior_change < opts.tol,
    })
}

/// `φ = (R² − r²)/(2N)` with `N = 2`, `Ψ = ln(R/r)/ln(R/r₀)`, `K₀`, and
/// `U_R` on the polar rings.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSet {
    pub grid: PolarGrid,
    pub r0: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub k0: f64,
    pub u_r: Vec<f64>,
    /// Boundary level of the `U_R` truncation used.
    pub u_r_level: f64,
}

pub fn phi(radius: f64, r: f64) -> f64 {
    (radius * radius - r * r) / 4.0
}

pub fn psi(radius: f64, r0: f64, r: f64) -> f64 {
    (radius / r).ln() / (radius / r0).ln()
}

/// Samples the barriers on the rings of `grid`. `U_R` is taken from the
/// level of `u_r` whose boundary value is closest to `boundary_level`.
pub fn build_barriers(
    decomp: &Decomposition,
    u_r: &LargeRadialProfile,
    grid: &PolarGrid,
    r0: f64,
    boundary_level: f64,
) -> Result<BarrierSet> {
    if u_r.grid().outer != grid.radius {
        return Err(Error::InvalidInput("U_R and the polar grid must share the radius".into()));
    }
    let level = u_r
        .ladder
        .iter()
        .min_by(|a, b| {
            (a.boundary_k - boundary_level)
                .abs()
                .total_cmp(&(b.boundary_k - boundary_level).abs())
        })
        .expect("ladders are nonempty");
    let values = grid.radii().iter().map(|&r| level.value_at(r)).collect();
    barriers_on_rings(decomp, grid, r0, values, level.boundary_k)
}

/// Barriers from ring values of `U_R` truncated at `level`.
pub fn barriers_on_rings(decomp: &Decomposition, grid: &PolarGrid, r0: f64, u_r: Vec<f64>, level: f64) -> Result<BarrierSet> {
    if !(r0 > 0.0 && r0 < grid.radius) {
        return Err(Error::InvalidInput(format!("need 0 < r0 < R, got r0 = {r0}")));
    }
    if u_r.len() != grid.nr {
        return Err(Error::DimensionMismatch {
            expected: grid.nr,
            got: u_r.len(),
        });
    }
    let radii = grid.radii();
    Ok(BarrierSet {
        grid: grid.clone(),
        r0,
        phi: radii.iter().map(|&r| phi(grid.radius, r)).collect(),
        psi: radii.iter().map(|&r| psi(grid.radius, r0, r)).collect(),
        k0: decomp.k0_bound,
        u_r,
        u_r_level: level,
    })
}

/// Ring values of `U_R` with the disk's own finite-volume operator: the
/// ladder for `g∞` with radial data on the rings of `grid` (four angles
/// suffice, the angular terms vanish). Returns the values at every level.
pub fn u_r_on_rings(decomp: &Decomposition, grid: &PolarGrid, opts: &LadderOptions) -> Result<Vec<(f64, Vec<f64>)>> {
    let rings = PolarGrid::new(grid.radius, grid.nr, 4)?;
    let ladder = continuation_to_blowup(&decomp.convex_part(), &rings, Shape::default(), 0.0, opts)?;
    Ok(ladder
        .levels
        .iter()
        .zip(&ladder.ks)
        .map(|(s, &k)| (k, (0..grid.nr).map(|i| s.field.ring_mean(i)).collect()))
        .collect())
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SandwichReport {
    /// `min (u − (U_R − K₀φ))`.
    pub lower_margin: f64,
    /// `min ((U_R + K₀φ) − u)`.
    pub upper_margin: f64,
    pub slack: f64,
    pub k0: f64,
    /// Node `(ring, angle)` of the smallest margin.
    pub worst_node: (usize, usize),
    pub worst_radius: f64,
    pub pass: bool,
}

/// Node-wise margins of `U_R − K₀φ ≤ u ≤ U_R + K₀φ`.
pub fn sandwich_check(u: &DiskSolution, barriers: &BarrierSet, slack: f64) -> Result<SandwichReport> {
    let grid = u.grid();
    if *grid != barriers.grid {
        return Err(Error::InvalidInput("barriers and solution live on different grids".into()));
    }
    let mut report = SandwichReport {
        lower_margin: f64::INFINITY,
        upper_margin: f64::INFINITY,
        slack,
        k0: barriers.k0,
        worst_node: (0, 0),
        worst_radius: grid.r(0),
        pass: false,
    };
    let mut worst = f64::INFINITY;
    for i in 0..grid.nr {
        let band = barriers.k0 * barriers.phi[i];
        for m in 0..grid.ntheta {
            let v = u.field.at(i, m);
            let lower = v - (barriers.u_r[i] - band);
            let upper = barriers.u_r[i] + band - v;
            report.lower_margin = report.lower_margin.min(lower);
            report.upper_margin = report.upper_margin.min(upper);
            if lower.min(upper) < worst {
                worst = lower.min(upper);
                report.worst_node = (i, m);
                report.worst_radius = grid.r(i);
            }
        }
    }
    report.pass = worst >= -slack;
    Ok(report)
}
