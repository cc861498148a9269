//! Numerical lab for large solutions of `−Δu + g(u) = 0`: solutions that
//! blow up on the whole boundary of a ball or annulus.
//!
//! * [`nonlinearity`]: the nonlinearity `g`, its Keller–Osserman
//!   classification and the convex/remainder decomposition.
//! * [`numerics`]: banded LU, damped Newton, adaptive quadrature,
//!   Richardson extrapolation.
//! * [`radial`]: radial truncated and large solutions, the reference
//!   profile `U_R` and the flux check.
//! * [`disk`]: the polar-grid solver, the blow-up ladder, barriers and the
//!   sandwich check.
//! * [`symmetry`]: diagnostics that measure how close a computed field is
//!   to radial symmetry.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod disk;
pub mod error;
pub mod nonlinearity;
pub mod numerics;
pub mod radial;
pub mod symmetry;

pub use error::{Error, Result};
pub use nonlinearity::{keller_osserman, BlowUpModel, KoReport, Nonlinearity};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/nonlinearity.md")]
    mod nonlinearity {}
    #[doc = include_str!("../../../book/src/radial.md")]
    mod radial {}
    #[doc = include_str!("../../../book/src/disk.md")]
    mod disk {}
    #[doc = include_str!("../../../book/src/symmetry.md")]
    mod symmetry {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
