//! Multiscale PDE laboratory: tensor-product finite elements for canonical
//! and homogenized elliptic, parabolic and wave problems, a classical
//! emulator of the Schrödingerization pipeline, spectral verification and
//! classical/quantum cost accounting.

pub mod cost;
pub mod error;
pub mod fem;
pub mod fit;
pub mod harness;
pub mod homogenization;
pub mod linalg;
pub mod scalar;
pub mod schrodinger;
pub mod spectral;
pub mod time;

pub use error::{Error, Result};
pub use scalar::{Rational, Real, Scalar};

/// Double precision sparse matrix (mass, stiffness and system matrices).
pub type SparseSymMatrix = linalg::SparseMatrix<f64>;
/// Single precision sparse matrix.
pub type SparseMatrixF32 = linalg::SparseMatrix<f32>;
/// Exact rational sparse matrix.
pub type ExactSparseMatrix = linalg::SparseMatrix<Rational>;
