//! Kernels, jittered Cholesky factors and B-spline projected Gaussian processes.

mod bspline;
mod cholesky;
mod kernel;
mod surface;

pub use bspline::{bspline_basis_row, KnotVector, CUBIC};
pub use cholesky::{cholesky_with_jitter, JitteredCholesky, JITTER_LADDER};
pub use kernel::{PeriodicKernel, SqExpKernel, PHENOLOGY_PERIOD};
pub(crate) use kernel::{periodic_unit, periodic_unit_dlog_ell, sq_dist, sqexp_unit, sqexp_unit_dlog_ell};
pub use surface::{build_spline_surface, project_weights, SplineSurface, DEFAULT_PRUNE_EPS};
