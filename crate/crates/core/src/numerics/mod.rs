//! Numerical kernels shared by the radial and disk solvers.

pub mod banded;
pub mod newton;
pub mod quad;
pub mod richardson;
pub mod stencil;

pub use banded::{solve_banded, BandedSystem};
pub use newton::{newton_solve, NewtonOptions, NewtonRecord};
pub use quad::{adaptive_quad, adaptive_quad_detailed, QuadResult};
pub use richardson::{richardson_limit, RichardsonEstimate};
