//! Linear-algebra kernels: sparse storage, band and dense eigen-solvers,
//! operator norms.

pub mod banded;
pub mod dense;
pub mod lapack;
pub mod norm;
pub mod sparse;

pub use norm::{op_norm, power_norm, PowerOptions};
pub use sparse::Csr;
