//! Compressed-row sparse matrices.
//!
//! Rows are stored sorted by column with no explicit zeros, so `sparsity()`
//! (the maximum number of stored entries in a row) reflects the exact
//! structural sparsity of an operator.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rayon::prelude::*;
use std::io::{BufRead, Write};
use std::ops::Range;

/// Rows above which matrix-vector products are split across threads.
const PAR_MATVEC_ROWS: usize = 32_768;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
    symmetric: bool,
}

impl<T: Scalar> SparseMatrix<T> {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        SparseMatrix {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            cols: Vec::new(),
            vals: Vec::new(),
            symmetric: n_rows == n_cols,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal_from(&vec![T::one(); n])
    }

    pub fn diagonal_from(d: &[T]) -> Self {
        let n = d.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(n);
        let mut vals = Vec::with_capacity(n);
        row_ptr.push(0);
        for (i, &v) in d.iter().enumerate() {
            if !v.negligible() {
                cols.push(i);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        SparseMatrix { n_rows: n, n_cols: n, row_ptr, cols, vals, symmetric: true }
    }

    /// Tridiagonal Toeplitz matrix with constant sub-, main and super-diagonal.
    pub fn tridiagonal(n: usize, sub: T, diag: T, sup: T) -> Self {
        let mut trips = Vec::with_capacity(3 * n);
        for i in 0..n {
            if i > 0 {
                trips.push((i, i - 1, sub));
            }
            trips.push((i, i, diag));
            if i + 1 < n {
                trips.push((i, i + 1, sup));
            }
        }
        Self::from_triplets(n, n, trips).expect("indices in range")
    }

    /// Builds a matrix from (row, col, value) triplets. Duplicates are summed
    /// in input order; entries that end up negligible are dropped.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        trips: impl IntoIterator<Item = (usize, usize, T)>,
    ) -> Result<Self> {
        let mut trips: Vec<(usize, usize, T)> = trips.into_iter().collect();
        for &(r, c, _) in &trips {
            if r >= n_rows || c >= n_cols {
                return Err(Error::invalid(format!(
                    "triplet ({r}, {c}) outside a {n_rows}x{n_cols} matrix"
                )));
            }
        }
        // stable sort keeps duplicate summation order deterministic
        trips.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut cols = Vec::with_capacity(trips.len());
        let mut vals: Vec<T> = Vec::with_capacity(trips.len());
        let mut idx = 0;
        for r in 0..n_rows {
            while idx < trips.len() && trips[idx].0 == r {
                let c = trips[idx].1;
                let mut v = trips[idx].2;
                idx += 1;
                while idx < trips.len() && trips[idx].0 == r && trips[idx].1 == c {
                    v = v + trips[idx].2;
                    idx += 1;
                }
                if !v.negligible() {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        let mut m = SparseMatrix { n_rows, n_cols, row_ptr, cols, vals, symmetric: false };
        m.symmetric = m.check_symmetric();
        Ok(m)
    }

    /// Assembles from already sorted, duplicate-free rows.
    pub(crate) fn from_rows_unchecked(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<T>,
        symmetric: bool,
    ) -> Self {
        debug_assert_eq!(row_ptr.len(), n_rows + 1);
        SparseMatrix { n_rows, n_cols, row_ptr, cols, vals, symmetric }
    }

    pub fn from_dense(rows: &[Vec<T>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let trips = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &v)| (i, j, v)));
        Self::from_triplets(n_rows, n_cols, trips).expect("dense rows have equal length")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    /// Symmetry flag recorded at construction.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(k) => v[k],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    /// Verifies symmetry entry by entry.
    pub fn check_symmetric(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        self.triplets().all(|(i, j, v)| {
            let (c, w) = self.row(j);
            match c.binary_search(&i) {
                Ok(k) => T::sym_close(v, w[k]),
                Err(_) => false,
            }
        })
    }

    /// Maximum number of stored entries in any row.
    pub fn sparsity(&self) -> usize {
        (0..self.n_rows).map(|i| self.row_nnz(i)).max().unwrap_or(0)
    }

    /// Maximum row count restricted to the given rows.
    pub fn sparsity_over(&self, rows: impl IntoIterator<Item = usize>) -> usize {
        rows.into_iter().map(|i| self.row_nnz(i)).max().unwrap_or(0)
    }

    /// Largest entry magnitude.
    pub fn max_entry(&self) -> T {
        self.vals.iter().fold(T::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n_rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.n_cols, "matvec input length");
        assert_eq!(y.len(), self.n_rows, "matvec output length");
        let row = |i: usize| {
            let (c, v) = self.row(i);
            c.iter().zip(v).fold(T::zero(), |acc, (&j, &a)| acc + a * x[j])
        };
        if self.n_rows >= PAR_MATVEC_ROWS {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = row(i);
            }
        }
    }

    /// y = Aᵀx
    pub fn matvec_transpose(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n_rows, "transposed matvec input length");
        let mut y = vec![T::zero(); self.n_cols];
        for (i, &xi) in x.iter().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                y[j] = y[j] + a * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.cols {
            counts[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut cols = vec![0usize; self.nnz()];
        let mut vals = vec![T::zero(); self.nnz()];
        for i in 0..self.n_rows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                cols[next[j]] = i;
                vals[next[j]] = a;
                next[j] += 1;
            }
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr,
            cols,
            vals,
            symmetric: self.symmetric,
        }
    }

    pub fn scale(&self, alpha: T) -> Self {
        if alpha.negligible() {
            return Self::zeros(self.n_rows, self.n_cols);
        }
        let mut out = self.clone();
        for v in &mut out.vals {
            *v = *v * alpha;
        }
        out.drop_negligible();
        out
    }

    /// alpha·self + beta·other
    pub fn lin_comb(&self, alpha: T, other: &Self, beta: T) -> Result<Self> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::DimensionMismatch {
                what: "matrix sum",
                left: self.n_rows,
                right: other.n_rows,
            });
        }
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut cols = Vec::with_capacity(self.nnz() + other.nnz());
        let mut vals = Vec::with_capacity(self.nnz() + other.nnz());
        row_ptr.push(0);
        for i in 0..self.n_rows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let (c, v) = if q >= cb.len() || (p < ca.len() && ca[p] < cb[q]) {
                    p += 1;
                    (ca[p - 1], alpha * va[p - 1])
                } else if p >= ca.len() || cb[q] < ca[p] {
                    q += 1;
                    (cb[q - 1], beta * vb[q - 1])
                } else {
                    p += 1;
                    q += 1;
                    (ca[p - 1], alpha * va[p - 1] + beta * vb[q - 1])
                };
                if !v.negligible() {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(SparseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            cols,
            vals,
            symmetric: self.symmetric && other.symmetric,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.lin_comb(T::one(), other, T::one())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lin_comb(T::one(), other, -T::one())
    }

    /// Sparse product self · other, rows accumulated in column order.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch { what: "matrix product", left: self.n_cols, right: other.n_rows });
        }
        let rows: Vec<(Vec<usize>, Vec<T>)> = (0..self.n_rows)
            .into_par_iter()
            .map(|i| {
                let mut acc: std::collections::BTreeMap<usize, T> = std::collections::BTreeMap::new();
                let (ci, vi) = self.row(i);
                for (&k, &a) in ci.iter().zip(vi) {
                    let (ck, vk) = other.row(k);
                    for (&j, &b) in ck.iter().zip(vk) {
                        let e = acc.entry(j).or_insert_with(T::zero);
                        *e = *e + a * b;
                    }
                }
                acc.into_iter().filter(|(_, v)| !v.negligible()).unzip()
            })
            .collect();
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        row_ptr.push(0);
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        for (c, v) in rows {
            cols.extend(c);
            vals.extend(v);
            row_ptr.push(cols.len());
        }
        let mut m = Self::from_rows_unchecked(self.n_rows, other.n_cols, row_ptr, cols, vals, false);
        m.symmetric = m.check_symmetric();
        Ok(m)
    }

    /// Kronecker product, row-major with `self` as the outer factor.
    pub fn kron(&self, other: &Self) -> Result<Self> {
        let overflow = || Error::DimensionOverflow { what: "Kronecker product" };
        let n_rows = self.n_rows.checked_mul(other.n_rows).ok_or_else(overflow)?;
        let n_cols = self.n_cols.checked_mul(other.n_cols).ok_or_else(overflow)?;
        let nnz = self.nnz().checked_mul(other.nnz()).ok_or_else(overflow)?;
        n_rows.checked_add(1).ok_or_else(overflow)?;
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for i in 0..self.n_rows {
            let (ca, va) = self.row(i);
            for k in 0..other.n_rows {
                let (cb, vb) = other.row(k);
                for (&j, &a) in ca.iter().zip(va) {
                    for (&l, &b) in cb.iter().zip(vb) {
                        let v = a * b;
                        if !v.negligible() {
                            cols.push(j * other.n_cols + l);
                            vals.push(v);
                        }
                    }
                }
                row_ptr.push(cols.len());
            }
        }
        Ok(SparseMatrix {
            n_rows,
            n_cols,
            row_ptr,
            cols,
            vals,
            symmetric: self.symmetric && other.symmetric,
        })
    }

    /// Assembles a block matrix. `row_sizes`/`col_sizes` give the block
    /// partition; each listed block is placed at its (block row, block col).
    pub fn from_blocks(
        row_sizes: &[usize],
        col_sizes: &[usize],
        blocks: &[(usize, usize, &SparseMatrix<T>)],
    ) -> Result<Self> {
        let offsets = |s: &[usize]| {
            let mut o = vec![0usize];
            for &x in s {
                o.push(o.last().unwrap() + x);
            }
            o
        };
        let ro = offsets(row_sizes);
        let co = offsets(col_sizes);
        let mut trips = Vec::new();
        for &(bi, bj, m) in blocks {
            if bi >= row_sizes.len() || bj >= col_sizes.len() {
                return Err(Error::invalid("block index outside the partition"));
            }
            if m.n_rows != row_sizes[bi] || m.n_cols != col_sizes[bj] {
                return Err(Error::DimensionMismatch {
                    what: "block placement",
                    left: m.n_rows,
                    right: row_sizes[bi],
                });
            }
            trips.extend(m.triplets().map(|(i, j, v)| (ro[bi] + i, co[bj] + j, v)));
        }
        Self::from_triplets(*ro.last().unwrap(), *co.last().unwrap(), trips)
    }

    pub fn submatrix(&self, rows: Range<usize>, cols: Range<usize>) -> Self {
        let mut row_ptr = vec![0];
        let mut c_out = Vec::new();
        let mut v_out = Vec::new();
        for i in rows.clone() {
            let (c, v) = self.row(i);
            let lo = c.partition_point(|&j| j < cols.start);
            let hi = c.partition_point(|&j| j < cols.end);
            c_out.extend(c[lo..hi].iter().map(|&j| j - cols.start));
            v_out.extend_from_slice(&v[lo..hi]);
            row_ptr.push(c_out.len());
        }
        let symmetric = self.symmetric && rows == cols;
        SparseMatrix {
            n_rows: rows.len(),
            n_cols: cols.len(),
            row_ptr,
            cols: c_out,
            vals: v_out,
            symmetric,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.n_cols]; self.n_rows];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }

    /// Converts entries through f64.
    pub fn cast<U: Scalar>(&self) -> SparseMatrix<U> {
        let trips = self.triplets().map(|(i, j, v)| {
            let x = v.to_f64().expect("entry representable as f64");
            (i, j, U::from_f64(x).expect("entry representable in target type"))
        });
        let mut m = SparseMatrix::from_triplets(self.n_rows, self.n_cols, trips).expect("same shape");
        m.symmetric = m.symmetric || (self.symmetric && m.check_symmetric());
        m
    }

    /// Largest entry of |self − other| as f64.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        match self.sub(other) {
            Ok(d) => d.max_entry().to_f64().unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    }

    fn drop_negligible(&mut self) {
        let mut row_ptr = vec![0];
        let mut cols = Vec::with_capacity(self.nnz());
        let mut vals = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                if !x.negligible() {
                    cols.push(j);
                    vals.push(x);
                }
            }
            row_ptr.push(cols.len());
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    /// Writes the text dump: a header `n_rows n_cols nnz` followed by
    /// 1-based `row col value` lines.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            let x = v.to_f64().unwrap_or(f64::NAN);
            writeln!(w, "{} {} {:.17e}", i + 1, j + 1, x)?;
        }
        Ok(())
    }
}

impl SparseMatrix<f64> {
    /// Parses the format produced by [`SparseMatrix::write_dump`].
    pub fn read_dump<R: BufRead>(r: R) -> Result<Self> {
        let bad = |msg: &str| Error::invalid(format!("matrix dump: {msg}"));
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("missing header"))??;
        let h: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("header is not three integers")))
            .collect::<Result<_>>()?;
        if h.len() != 3 {
            return Err(bad("header is not three integers"));
        }
        let mut trips = Vec::with_capacity(h[2]);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 3 {
                return Err(bad("entry line is not a triple"));
            }
            let i: usize = t[0].parse().map_err(|_| bad("bad row index"))?;
            let j: usize = t[1].parse().map_err(|_| bad("bad column index"))?;
            let v: f64 = t[2].parse().map_err(|_| bad("bad value"))?;
            if i == 0 || j == 0 {
                return Err(bad("indices are 1-based"));
            }
            trips.push((i - 1, j - 1, v));
        }
        if trips.len() != h[2] {
            return Err(bad("entry count does not match header"));
        }
        Self::from_triplets(h[0], h[1], trips)
    }
}

/// Kronecker product of a list of factors, first factor outermost.
pub fn kron_all<T: Scalar>(factors: &[&SparseMatrix<T>]) -> Result<SparseMatrix<T>> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| Error::invalid("Kronecker product of an empty list"))?;
    let mut acc = (*first).clone();
    for f in rest {
        acc = acc.kron(f)?;
    }
    Ok(acc)
}

/// Block lower bidiagonal matrix with `a` on the diagonal and `-b` below it.
pub fn block_bidiagonal<T: Scalar>(
    a: &SparseMatrix<T>,
    b: &SparseMatrix<T>,
    n_blocks: usize,
) -> Result<SparseMatrix<T>> {
    if !a.is_square() || a.n_rows() != b.n_rows() || a.n_cols() != b.n_cols() {
        return Err(Error::DimensionMismatch {
            what: "block bidiagonal",
            left: a.n_rows(),
            right: b.n_rows(),
        });
    }
    let m = a.n_rows();
    let n = m.checked_mul(n_blocks).ok_or(Error::DimensionOverflow { what: "block bidiagonal" })?;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(n_blocks * (a.nnz() + b.nnz()));
    let mut vals = Vec::with_capacity(n_blocks * (a.nnz() + b.nnz()));
    row_ptr.push(0);
    for blk in 0..n_blocks {
        for i in 0..m {
            if blk > 0 {
                let (c, v) = b.row(i);
                for (&j, &x) in c.iter().zip(v) {
                    cols.push((blk - 1) * m + j);
                    vals.push(-x);
                }
            }
            let (c, v) = a.row(i);
            for (&j, &x) in c.iter().zip(v) {
                cols.push(blk * m + j);
                vals.push(x);
            }
            row_ptr.push(cols.len());
        }
    }
    let symmetric = n_blocks == 1 && a.is_symmetric() || b.nnz() == 0 && a.is_symmetric();
    Ok(SparseMatrix::from_rows_unchecked(n, n, row_ptr, cols, vals, symmetric))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    #[test]
    fn kron_identity() {
        let i2 = SparseMatrix::<f64>::identity(2);
        assert_eq!(i2.kron(&i2).unwrap(), SparseMatrix::identity(4));
    }

    #[test]
    fn kron_index_layout() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![0.0, 3.0]]);
        let b = SparseMatrix::from_dense(&[vec![5.0, 0.0], vec![7.0, 11.0]]);
        let k = a.kron(&b).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for r in 0..2 {
                    for c in 0..2 {
                        assert_eq!(k.get(i * 2 + r, j * 2 + c), a.get(i, j) * b.get(r, c));
                    }
                }
            }
        }
    }

    #[test]
    fn exact_rational_entries() {
        let h = Rational::new(1, 3);
        let m1 = SparseMatrix::tridiagonal(2, h / 6, h * 2 / 3, h / 6);
        let m = m1.kron(&m1).unwrap();
        assert_eq!(m.get(0, 0), Rational::new(4, 81));
        assert!(m.is_symmetric());
    }

    #[test]
    fn block_bidiagonal_scalar() {
        let one = SparseMatrix::<f64>::identity(1);
        let l = block_bidiagonal(&one, &one, 3).unwrap();
        let d = l.to_dense();
        assert_eq!(d, vec![vec![1.0, 0.0, 0.0], vec![-1.0, 1.0, 0.0], vec![0.0, -1.0, 1.0]]);
    }

    #[test]
    fn dump_round_trip() {
        let a = SparseMatrix::from_dense(&[vec![1.0, -2.5e-7], vec![0.0, std::f64::consts::PI]]);
        let mut buf = Vec::new();
        a.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("2 2 3\n1 1 1.00000000000000000e0"));
        let b = SparseMatrix::read_dump(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_entries_not_stored() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 1e-301), (1, 1, 2.0), (1, 1, -2.0)])
            .unwrap();
        assert_eq!(a.nnz(), 1);
    }
}
