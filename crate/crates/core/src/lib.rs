//! Cubic-regularized quasi-Newton methods for smooth convex optimization.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: dense vectors, thin QR, symmetric eigendecomposition.
//! - [`oracle`]: logistic and quadratic objectives with counted evaluations.
//! - [`models`]: low-rank quasi-Newton Hessian approximations.
//! - [`cubic`]: the cubic-regularized subproblem and the estimating-sequence minimizer.
//! - [`solvers`]: adaptive, accelerated and baseline outer loops.
//! - [`dataio`]: LIBSVM ingestion, row normalization and synthetic instances.

pub mod cubic;
pub mod dataio;
pub mod linalg;
pub mod models;
pub mod oracle;
pub mod solvers;
