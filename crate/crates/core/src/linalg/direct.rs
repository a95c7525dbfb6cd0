//! Direct solvers: an envelope (skyline) LU without pivoting for the banded
//! and bordered systems produced by assembly, and a dense partially pivoted
//! LU used as a fallback and as an independent oracle.

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Size limit of [`dense_direct_solve`].
pub const DIRECT_SOLVE_MAX_ROWS: usize = 20_000;
/// Largest dense fallback, in rows.
const DENSE_FALLBACK_MAX_ROWS: usize = 3_000;
/// Default storage budget for the envelope factors, in stored entries.
pub const ENVELOPE_BUDGET: usize = 60_000_000;

fn pivot_floor<T: Real>(scale: T, n: usize) -> T {
    T::epsilon() * T::c(16.0) * T::c(n.max(1) as f64).sqrt() * scale
}

/// Dense LU with partial pivoting.
#[derive(Clone, Debug)]
pub struct DenseLu<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
}

impl<T: Real> DenseLu<T> {
    pub fn factor_dense(n: usize, mut lu: Vec<T>) -> Result<Self> {
        assert_eq!(lu.len(), n * n);
        let scale = lu.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let floor = pivot_floor(scale, n);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pv > floor) {
                return Err(Error::Singular { row: k, pivot: pv.as_f64() });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let d = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / d;
                lu[i * n + k] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        lu[i * n + j] = lu[i * n + j] - f * lu[k * n + j];
                    }
                }
            }
        }
        Ok(DenseLu { n, lu, perm })
    }

    pub fn factor(a: &SparseMatrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch { what: "LU factorization", left: a.n_rows(), right: a.n_cols() });
        }
        let n = a.n_rows();
        let mut lu = vec![T::zero(); n * n];
        for (i, j, v) in a.triplets() {
            lu[i * n + j] = v;
        }
        Self::factor_dense(n, lu)
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s = s - self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s = s - self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }
}

/// Envelope LU factorization without pivoting.
///
/// Crout order: row i of L, then column i of U. L is stored by rows starting at the first nonzero column of each row of
/// A, U by columns starting at the first nonzero row of each column. Fill-in
/// stays inside these envelopes, so memory is the envelope size.
#[derive(Clone, Debug)]
pub struct SkylineLu<T> {
    n: usize,
    first_col: Vec<usize>,
    first_row: Vec<usize>,
    l_ptr: Vec<usize>,
    l: Vec<T>,
    u_ptr: Vec<usize>,
    u: Vec<T>,
}

/// Number of stored entries the envelope factors of `a` would need.
pub fn envelope_size<T: Real>(a: &SparseMatrix<T>) -> usize {
    let (fc, fr) = envelopes(a);
    fc.iter().enumerate().map(|(i, &c)| i - c).sum::<usize>()
        + fr.iter().enumerate().map(|(j, &r)| j - r + 1).sum::<usize>()
}

fn envelopes<T: Real>(a: &SparseMatrix<T>) -> (Vec<usize>, Vec<usize>) {
    let n = a.n_rows();
    let mut fc: Vec<usize> = (0..n).collect();
    let mut fr: Vec<usize> = (0..n).collect();
    for (i, j, _) in a.triplets() {
        if j < i {
            fc[i] = fc[i].min(j);
        } else {
            fr[j] = fr[j].min(i);
        }
    }
    (fc, fr)
}

impl<T: Real> SkylineLu<T> {
    pub fn factor(a: &SparseMatrix<T>) -> Result<Self> {
        Self::factor_with_budget(a, ENVELOPE_BUDGET)
    }

    pub fn factor_with_budget(a: &SparseMatrix<T>, budget: usize) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch { what: "LU factorization", left: a.n_rows(), right: a.n_cols() });
        }
        let n = a.n_rows();
        let (first_col, first_row) = envelopes(a);
        let mut l_ptr = vec![0usize; n + 1];
        let mut u_ptr = vec![0usize; n + 1];
        for i in 0..n {
            l_ptr[i + 1] = l_ptr[i] + (i - first_col[i]);
            u_ptr[i + 1] = u_ptr[i] + (i - first_row[i] + 1);
        }
        let size = l_ptr[n] + u_ptr[n];
        if size > budget {
            return Err(Error::TooLarge { what: "envelope LU storage", n: size, limit: budget });
        }
        let mut l = vec![T::zero(); l_ptr[n]];
        let mut u = vec![T::zero(); u_ptr[n]];
        for (i, j, v) in a.triplets() {
            if j < i {
                l[l_ptr[i] + j - first_col[i]] = v;
            } else {
                u[u_ptr[j] + i - first_row[j]] = v;
            }
        }
        let scale = a.max_entry();
        let floor = pivot_floor(scale, n);
        for i in 0..n {
            // row i of L
            let fci = first_col[i];
            for j in fci..i {
                let lo = first_row[j].max(fci);
                let s = if lo < j {
                    let lrow = &l[l_ptr[i] + lo - fci..l_ptr[i] + j - fci];
                    let ucol = &u[u_ptr[j] + lo - first_row[j]..u_ptr[j] + j - first_row[j]];
                    dot(lrow, ucol)
                } else {
                    T::zero()
                };
                let idx = l_ptr[i] + j - fci;
                let ujj = u[u_ptr[j] + j - first_row[j]];
                l[idx] = (l[idx] - s) / ujj;
            }
            // column i of U
            let fri = first_row[i];
            for k in fri..=i {
                let lo = first_col[k].max(fri);
                if lo < k {
                    let lrow = &l[l_ptr[k] + lo - first_col[k]..l_ptr[k] + k - first_col[k]];
                    let ucol = &u[u_ptr[i] + lo - fri..u_ptr[i] + k - fri];
                    let s = dot(lrow, ucol);
                    let idx = u_ptr[i] + k - fri;
                    u[idx] = u[idx] - s;
                }
            }
            let piv = u[u_ptr[i] + i - fri];
            if !(piv.abs() > floor) {
                return Err(Error::Singular { row: i, pivot: piv.as_f64() });
            }
        }
        Ok(SkylineLu { n, first_col, first_row, l_ptr, l, u_ptr, u })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [T]) {
        assert_eq!(x.len(), self.n, "right-hand side length");
        for i in 0..self.n {
            let fc = self.first_col[i];
            let row = &self.l[self.l_ptr[i]..self.l_ptr[i + 1]];
            let s = dot(row, &x[fc..i]);
            x[i] = x[i] - s;
        }
        for j in (0..self.n).rev() {
            let fr = self.first_row[j];
            let col = &self.u[self.u_ptr[j]..self.u_ptr[j + 1]];
            let xj = x[j] / col[j - fr];
            x[j] = xj;
            for (k, &ukj) in col[..j - fr].iter().enumerate() {
                x[fr + k] = x[fr + k] - ukj * xj;
            }
        }
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

/// Factorization picked by [`factorize`].
#[derive(Clone, Debug)]
pub enum DirectFactor<T> {
    Skyline(SkylineLu<T>),
    Dense(DenseLu<T>),
}

impl<T: Real> DirectFactor<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        match self {
            DirectFactor::Skyline(f) => f.solve(b),
            DirectFactor::Dense(f) => f.solve(b),
        }
    }
}

/// Envelope LU, falling back to pivoted dense LU on a tiny pivot when the
/// matrix is small enough.
pub fn factorize<T: Real>(a: &SparseMatrix<T>) -> Result<DirectFactor<T>> {
    match SkylineLu::factor(a) {
        Ok(f) => Ok(DirectFactor::Skyline(f)),
        Err(e @ (Error::Singular { .. } | Error::TooLarge { .. })) => {
            if a.n_rows() <= DENSE_FALLBACK_MAX_ROWS {
                DenseLu::factor(a).map(DirectFactor::Dense)
            } else {
                Err(e)
            }
        }
        Err(e) => Err(e),
    }
}

/// Reference direct solve for systems with at most 20000 rows.
pub fn dense_direct_solve<T: Real>(a: &SparseMatrix<T>, rhs: &[T]) -> Result<Vec<T>> {
    if a.n_rows() > DIRECT_SOLVE_MAX_ROWS {
        return Err(Error::TooLarge { what: "direct solve", n: a.n_rows(), limit: DIRECT_SOLVE_MAX_ROWS });
    }
    if rhs.len() != a.n_rows() {
        return Err(Error::DimensionMismatch { what: "direct solve rhs", left: rhs.len(), right: a.n_rows() });
    }
    Ok(factorize(a)?.solve(rhs))
}

/// Solves with the dense pivoted LU only; used as an independent oracle.
pub fn dense_lu_solve<T: Real>(a: &SparseMatrix<T>, rhs: &[T]) -> Result<Vec<T>> {
    if a.n_rows() > DENSE_FALLBACK_MAX_ROWS {
        return Err(Error::TooLarge { what: "dense LU", n: a.n_rows(), limit: DENSE_FALLBACK_MAX_ROWS });
    }
    Ok(DenseLu::factor(a)?.solve(rhs))
}
