//! Dense linear algebra kernels shared by every stage of the pipeline: the
//! row-major [`Matrix`] carrier, a cyclic Jacobi eigensolver for symmetric
//! matrices, minimum-cost assignment, and PCA projection.
//!
//! Everything here is deterministic: no randomized pivoting, stable tie
//! breaking, fixed summation order.

mod assignment;
mod eigen;
mod matrix;
mod pca;

pub use assignment::hungarian;
pub use eigen::{sym_eig, EigenDecomposition};
pub use matrix::{probe_allocations, Matrix};
pub use pca::pca_project;
