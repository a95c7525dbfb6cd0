//! Complex state vectors.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Complex vector whose entries are all finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVector {
    entries: Vec<Complex64>,
}

impl ComplexVector {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("complex vector must be non-empty"));
        }
        if let Some(i) = entries.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::invalid(format!("non-finite entry at index {i}")));
        }
        Ok(ComplexVector { entries })
    }

    pub fn from_real(x: &[f64]) -> Result<Self> {
        Self::new(x.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.entries
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl std::ops::Index<usize> for ComplexVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.entries[i]
    }
}
