//! Damped Newton iteration on banded systems.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::banded::{solve_banded, BandedSystem};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOptions {
    /// Absolute tolerance on the sup norm of the residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Smallest admissible damping factor before the line search gives up.
    pub min_damping: f64,
    /// Compare the analytic Jacobian with central differences on a few
    /// columns before iterating.
    pub check_jacobian: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            min_damping: 1e-6,
            check_jacobian: cfg!(debug_assertions),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonRecord {
    pub iterations: usize,
    /// Sup norm of the final residual.
    pub residual: f64,
    /// Accepted step length per iteration, each in (0, 1].
    pub damping: Vec<f64>,
    pub converged: bool,
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Number of Jacobian columns probed by the consistency check.
const PROBE_COLUMNS: usize = 10;

/// Central-difference probe of `PROBE_COLUMNS` randomly chosen columns.
pub fn check_jacobian<F, J>(residual: &mut F, jacobian: &mut J, x: &[f64], rel_tol: f64) -> Result<()>
where
    F: FnMut(&[f64]) -> Vec<f64>,
    J: FnMut(&[f64]) -> BandedSystem,
{
    let n = x.len();
    let jac = jacobian(x);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let columns = sample(&mut rng, n, PROBE_COLUMNS.min(n));
    let mut probe = x.to_vec();
    for j in columns.iter() {
        let step = 1e-6 * (1.0 + x[j].abs());
        probe[j] = x[j] + step;
        let plus = residual(&probe);
        probe[j] = x[j] - step;
        let minus = residual(&probe);
        probe[j] = x[j];
        let col_scale = (0..n).map(|i| jac.get(i, j).abs()).fold(0.0, f64::max);
        for i in 0..n {
            let fd = (plus[i] - minus[i]) / (2.0 * step);
            let an = jac.get(i, j);
            if (fd - an).abs() > rel_tol * (1.0 + col_scale) {
                return Err(Error::InconsistentJacobian {
                    column: j,
                    analytic: an,
                    finite_difference: fd,
                });
            }
        }
    }
    Ok(())
}

/// Newton's method with Armijo backtracking on the residual sup norm: the
/// step starts at 1 and is halved until the norm decreases sufficiently.
pub fn newton_solve<F, J>(mut residual: F, mut jacobian: J, init: Vec<f64>, opts: &NewtonOptions) -> Result<(Vec<f64>, NewtonRecord)>
where
    F: FnMut(&[f64]) -> Vec<f64>,
    J: FnMut(&[f64]) -> BandedSystem,
{
    let mut x = init;
    let mut f = residual(&x);
    if f.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: f.len(),
        });
    }
    if opts.check_jacobian {
        check_jacobian(&mut residual, &mut jacobian, &x, 1e-4)?;
    }
    let mut norm = sup_norm(&f);
    let mut damping = Vec::new();
    let mut x_try = vec![0.0; x.len()];

    while norm > opts.tol {
        if damping.len() >= opts.max_iter {
            return Err(Error::MaxIterations {
                iterations: damping.len(),
                residual: norm,
            });
        }
        let mut jac = jacobian(&x);
        jac.rhs = f.iter().map(|v| -v).collect();
        let dx = solve_banded(&jac)?;

        let mut t = 1.0;
        loop {
            for ((xt, xi), di) in x_try.iter_mut().zip(&x).zip(&dx) {
                *xt = xi + t * di;
            }
            let f_try = residual(&x_try);
            let n_try = sup_norm(&f_try);
            if n_try.is_finite() && n_try <= (1.0 - 1e-4 * t) * norm {
                std::mem::swap(&mut x, &mut x_try);
                f = f_try;
                norm = n_try;
                break;
            }
            t *= 0.5;
            if t < opts.min_damping {
                return Err(Error::LineSearchStalled {
                    damping: t,
                    residual: norm,
                });
            }
        }
        damping.push(t);
    }

    let record = NewtonRecord {
        iterations: damping.len(),
        residual: norm,
        damping,
        converged: true,
    };
    Ok((x, record))
}
