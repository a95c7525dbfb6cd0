//! Sparse linear algebra shared by every other module.

pub mod cg;
pub mod complex;
pub mod direct;
pub mod sparse;

pub use cg::{cg_solve, cg_solve_with, SolveStats};
pub use complex::ComplexVector;
pub use direct::{dense_direct_solve, dense_lu_solve, factorize, DenseLu, DirectFactor, SkylineLu};
pub use sparse::{block_bidiagonal, kron_all, SparseMatrix};
