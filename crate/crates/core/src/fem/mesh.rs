use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};

/// Uniform tensor-product mesh of [0,1]^d with `n` interior nodes per
/// direction and spacing h = 1/(n+1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorMesh {
    d: usize,
    n: usize,
}

impl TensorMesh {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("mesh dimension must be at least 1"));
        }
        if n == 0 {
            return Err(Error::invalid("mesh needs at least one interior node per direction"));
        }
        if n > i32::MAX as usize - 2 {
            return Err(Error::DimensionOverflow { what: "mesh size" });
        }
        Ok(TensorMesh { d, n })
    }

    /// Mesh whose spacing is 1/cells.
    pub fn with_cells(d: usize, cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(Error::invalid("a mesh needs at least two cells per direction"));
        }
        Self::new(d, cells - 1)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> usize {
        self.n + 1
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n + 1) as f64
    }

    /// Exact spacing.
    pub fn h_exact(&self) -> Rational {
        Rational::new(1, (self.n + 1) as i64)
    }

    pub fn h_as<T: Scalar>(&self) -> T {
        T::one() / T::from_usize_exact(self.n + 1)
    }

    /// Number of interior degrees of freedom, N^d.
    pub fn dof(&self) -> Result<usize> {
        checked_pow(self.n, self.d).ok_or(Error::DimensionOverflow { what: "interior dof count" })
    }

    /// Coordinates of the interior node with flat index `idx` (first
    /// direction outermost).
    pub fn node_coords(&self, mut idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.d];
        for k in (0..self.d).rev() {
            x[k] = ((idx % self.n) + 1) as f64 * self.h();
            idx /= self.n;
        }
        x
    }
}

pub(crate) fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    (0..exp).try_fold(1usize, |acc, _| acc.checked_mul(base))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_is_exact() {
        for n in [1, 3, 7, 31] {
            let m = TensorMesh::new(2, n).unwrap();
            assert_eq!(m.h_exact() * Rational::from_integer((n + 1) as i64), Rational::from_integer(1));
            assert_eq!(m.dof().unwrap(), n * n);
        }
        assert!(TensorMesh::new(1, 0).is_err());
    }

    #[test]
    fn node_order_is_row_major() {
        let m = TensorMesh::new(2, 3).unwrap();
        assert_eq!(m.node_coords(1), vec![0.25, 0.5]);
        assert_eq!(m.node_coords(3), vec![0.5, 0.25]);
    }
}
