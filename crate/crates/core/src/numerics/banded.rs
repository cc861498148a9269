//! Banded linear systems and their direct solution.
//!
//! Both discretizations in this crate produce banded Jacobians: the radial
//! line is tridiagonal, and the polar grid ordered ring by ring (angle
//! fastest) has bandwidth equal to the angular count. Storage is row-major:
//! row `i` keeps the columns `i - lower ..= i + upper`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BandedSystem {
    n: usize,
    lower: usize,
    upper: usize,
    band: Vec<f64>,
    /// Right-hand side.
    pub rhs: Vec<f64>,
}

impl BandedSystem {
    /// All-zero system of dimension `n`.
    pub fn new(n: usize, lower: usize, upper: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("banded system of dimension 0".into()));
        }
        if n > 1 && (lower >= n || upper >= n) {
            return Err(Error::InvalidInput(format!(
                "bandwidths ({lower}, {upper}) must be smaller than the dimension {n}"
            )));
        }
        let width = lower + upper + 1;
        Ok(Self {
            n,
            lower,
            upper,
            band: vec![0.0; n * width],
            rhs: vec![0.0; n],
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut sys = Self::new(n, 0, 0).expect("identity dimension");
        for i in 0..n {
            sys.set(i, i, 1.0);
        }
        sys
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.lower
    }

    pub fn upper(&self) -> usize {
        self.upper
    }

    /// Raw band storage, `dim() * (lower + upper + 1)` entries.
    pub fn band(&self) -> &[f64] {
        &self.band
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.lower >= i && j <= i + self.upper
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        i * (self.lower + self.upper + 1) + (j + self.lower - i)
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.band[self.offset(i, j)]
        } else {
            0.0
        }
    }

    /// Panics when `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside the band");
        let k = self.offset(i, j);
        self.band[k] = value;
    }

    /// Panics when `(i, j)` lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside the band");
        let k = self.offset(i, j);
        self.band[k] += value;
    }

    /// Column `j` restricted to the rows where it is stored.
    pub fn column(&self, j: usize) -> Vec<(usize, f64)> {
        let lo = j.saturating_sub(self.upper);
        let hi = (j + self.lower).min(self.n - 1);
        (lo..=hi).map(|i| (i, self.get(i, j))).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.lower);
                let hi = (i + self.upper).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Max-row-sum norm.
    pub fn norm_inf(&self) -> f64 {
        let width = self.lower + self.upper + 1;
        self.band
            .chunks(width)
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting inside the
/// band. Row interchanges widen the upper band by `lower`, as in LAPACK's
/// `gbsv`.
pub fn solve_banded(sys: &BandedSystem) -> Result<Vec<f64>> {
    let n = sys.n;
    let kl = sys.lower;
    let ku = sys.upper;
    // Working row i holds columns i - kl ..= i + ku + kl.
    let w = 2 * kl + ku + 1;
    let mut a = vec![0.0; n * w];
    let idx = |i: usize, j: usize| i * w + (j + kl - i);
    let mut scale = vec![0.0f64; n];
    for i in 0..n {
        let lo = i.saturating_sub(kl);
        let hi = (i + ku).min(n - 1);
        for j in lo..=hi {
            let v = sys.get(i, j);
            a[idx(i, j)] = v;
            scale[i] = scale[i].max(v.abs());
        }
    }
    let mut b = sys.rhs.clone();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }

    for k in 0..n {
        let last_row = (k + kl).min(n - 1);
        let mut p = k;
        let mut best = a[idx(k, k)].abs();
        for i in k + 1..=last_row {
            let v = a[idx(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 || best < 1e-14 * scale[p] {
            return Err(Error::Singular { row: k, pivot: best });
        }
        let last_col = (k + ku + kl).min(n - 1);
        if p != k {
            for j in k..=last_col {
                let (ik, ip) = (idx(k, j), idx(p, j));
                a.swap(ik, ip);
            }
            b.swap(k, p);
            scale.swap(k, p);
        }
        let pivot = a[idx(k, k)];
        for i in k + 1..=last_row {
            let factor = a[idx(i, k)] / pivot;
            if factor == 0.0 {
                continue;
            }
            a[idx(i, k)] = 0.0;
            for j in k + 1..=last_col {
                a[idx(i, j)] -= factor * a[idx(k, j)];
            }
            b[i] -= factor * b[k];
        }
    }

    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let last_col = (i + ku + kl).min(n - 1);
        let mut acc = b[i];
        for j in i + 1..=last_col {
            acc -= a[idx(i, j)] * x[j];
        }
        x[i] = acc / a[idx(i, i)];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual_bound_holds(sys: &BandedSystem, x: &[f64]) -> bool {
        let ax = sys.matvec(x);
        let r = ax.iter().zip(&sys.rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let xn = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let bn = sys.rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
        r <= 1e-10 * (sys.norm_inf() * xn + bn)
    }

    #[test]
    fn identity_returns_rhs() {
        let mut sys = BandedSystem::identity(5);
        sys.rhs = vec![1.0, -2.0, 3.5, 0.0, 7.0];
        assert_eq!(solve_banded(&sys).unwrap(), sys.rhs);
    }

    #[test]
    fn dirichlet_laplacian_three_nodes() {
        // -u'' = 1 with u = 0 outside, h = 1.
        let mut sys = BandedSystem::new(3, 1, 1).unwrap();
        for i in 0..3 {
            sys.set(i, i, 2.0);
            if i > 0 {
                sys.set(i, i - 1, -1.0);
            }
            if i < 2 {
                sys.set(i, i + 1, -1.0);
            }
        }
        sys.rhs = vec![1.0; 3];
        let x = solve_banded(&sys).unwrap();
        for (got, want) in x.iter().zip([1.5, 2.0, 1.5]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_matrix_is_singular() {
        let mut sys = BandedSystem::new(4, 1, 1).unwrap();
        sys.rhs = vec![1.0; 4];
        assert!(matches!(solve_banded(&sys), Err(Error::Singular { .. })));
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        // [[0, 1], [1, 1]] x = [1, 2] -> x = [1, 1]
        let mut sys = BandedSystem::new(2, 1, 1).unwrap();
        sys.set(0, 1, 1.0);
        sys.set(1, 0, 1.0);
        sys.set(1, 1, 1.0);
        sys.rhs = vec![1.0, 2.0];
        let x = solve_banded(&sys).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn laplacian_reproduces_linear_source_exactly() {
        // u'' = f with f affine: the three-point stencil is exact for cubics.
        let n = 50;
        let h = 1.0 / (n as f64 + 1.0);
        let exact = |x: f64| x * x * x / 6.0 + x * x - 0.3 * x + 0.25;
        let f = |x: f64| x + 2.0;
        let mut sys = BandedSystem::new(n, 1, 1).unwrap();
        for i in 0..n {
            let x = (i as f64 + 1.0) * h;
            sys.set(i, i, -2.0);
            if i > 0 {
                sys.set(i, i - 1, 1.0);
            }
            if i + 1 < n {
                sys.set(i, i + 1, 1.0);
            }
            sys.rhs[i] = h * h * f(x);
        }
        sys.rhs[0] -= exact(0.0);
        sys.rhs[n - 1] -= exact(1.0);
        let u = solve_banded(&sys).unwrap();
        for (i, ui) in u.iter().enumerate() {
            let x = (i as f64 + 1.0) * h;
            assert!((ui - exact(x)).abs() < 1e-10, "node {i}");
        }
    }

    #[test]
    fn wide_band_with_pivoting_meets_residual_bound() {
        let n = 40;
        let (kl, ku) = (5, 3);
        let mut sys = BandedSystem::new(n, kl, ku).unwrap();
        let mut seed = 17u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                sys.set(i, j, next());
            }
            sys.rhs[i] = next();
        }
        let x = solve_banded(&sys).unwrap();
        assert!(residual_bound_holds(&sys, &x));
    }

    #[test]
    fn rejects_bandwidth_not_below_dimension() {
        assert!(BandedSystem::new(3, 3, 0).is_err());
    }
}
