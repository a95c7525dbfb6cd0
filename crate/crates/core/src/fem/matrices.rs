//! Exact P1 mass and stiffness matrices and their tensor-product forms.

use super::mesh::TensorMesh;
use crate::error::Result;
use crate::linalg::{kron_all, SparseMatrix};
use crate::scalar::Scalar;

fn two<T: Scalar>() -> T {
    T::one() + T::one()
}

/// 1D mass matrix: tridiagonal with 2h/3 on the diagonal and h/6 beside it.
pub fn mass_1d<T: Scalar>(mesh: &TensorMesh) -> SparseMatrix<T> {
    let h: T = mesh.h_as();
    let six = T::from_usize_exact(6);
    let three = T::from_usize_exact(3);
    SparseMatrix::tridiagonal(mesh.n(), h / six, two::<T>() * h / three, h / six)
}

/// 1D stiffness matrix: 2/h on the diagonal, -1/h beside it.
pub fn stiffness_1d<T: Scalar>(mesh: &TensorMesh) -> SparseMatrix<T> {
    let inv_h = T::from_usize_exact(mesh.cells());
    SparseMatrix::tridiagonal(mesh.n(), -inv_h, two::<T>() * inv_h, -inv_h)
}

/// 1D mass matrix including the two boundary nodes (size N+2); the end
/// nodes carry h/3 on the diagonal.
pub fn mass_1d_extended<T: Scalar>(mesh: &TensorMesh) -> SparseMatrix<T> {
    let h: T = mesh.h_as();
    let n = mesh.n() + 2;
    let six = T::from_usize_exact(6);
    let three = T::from_usize_exact(3);
    let mut trips = Vec::with_capacity(3 * n);
    for i in 0..n {
        let diag = if i == 0 || i + 1 == n { h / three } else { two::<T>() * h / three };
        trips.push((i, i, diag));
        if i + 1 < n {
            trips.push((i, i + 1, h / six));
            trips.push((i + 1, i, h / six));
        }
    }
    SparseMatrix::from_triplets(n, n, trips).expect("indices in range")
}

/// d-fold Kronecker power of the 1D mass matrix.
pub fn mass_d<T: Scalar>(mesh: &TensorMesh) -> Result<SparseMatrix<T>> {
    let m1 = mass_1d::<T>(mesh);
    kron_all(&vec![&m1; mesh.d()])
}

/// Kronecker sum: K₁ in one slot and M₁ in every other, summed over slots.
pub fn stiffness_d<T: Scalar>(mesh: &TensorMesh) -> Result<SparseMatrix<T>> {
    let m1 = mass_1d::<T>(mesh);
    let k1 = stiffness_1d::<T>(mesh);
    let d = mesh.d();
    let mut total: Option<SparseMatrix<T>> = None;
    for slot in 0..d {
        let factors: Vec<&SparseMatrix<T>> = (0..d).map(|k| if k == slot { &k1 } else { &m1 }).collect();
        let term = kron_all(&factors)?;
        total = Some(match total {
            None => term,
            Some(acc) => acc.add(&term)?,
        });
    }
    Ok(total.expect("d >= 1"))
}

/// Stiffness matrix of the lifted problem with unit coefficient: block
/// diagonal with blocks (h^{-d}M_ext)^{⊗k}⊗K for k = n, …, 1 followed by K.
pub fn lifted_unit_stiffness<T: Scalar>(mesh: &TensorMesh, n_scales: usize) -> Result<SparseMatrix<T>> {
    let d = mesh.d();
    let m_ext = mass_1d_extended::<T>(mesh).scale(T::from_usize_exact(mesh.cells()));
    let k = stiffness_d::<T>(mesh)?;
    let mut blocks = Vec::new();
    for level in (1..=n_scales).rev() {
        let macro_factors: Vec<&SparseMatrix<T>> = vec![&m_ext; level * d];
        let left = kron_all(&macro_factors)?;
        blocks.push(left.kron(&k)?);
    }
    blocks.push(k);
    let sizes: Vec<usize> = blocks.iter().map(|b| b.n_rows()).collect();
    let placed: Vec<(usize, usize, &SparseMatrix<T>)> = blocks.iter().enumerate().map(|(i, b)| (i, i, b)).collect();
    SparseMatrix::from_blocks(&sizes, &sizes, &placed)
}
