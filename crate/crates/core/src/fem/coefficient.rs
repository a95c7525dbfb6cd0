//! Scalar multiscale coefficients a(x, y₁, …, yₙ), 1-periodic in every yₖ.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Evaluation callback: macro point `x` (length d) and the fast variables
/// flattened scale by scale (length n·d).
pub type CoefficientFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct MultiscaleCoefficient {
    name: String,
    d: usize,
    epsilons: Vec<f64>,
    alpha: f64,
    beta: f64,
    func: Arc<CoefficientFn>,
}

impl fmt::Debug for MultiscaleCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiscaleCoefficient")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("epsilons", &self.epsilons)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .finish()
    }
}

pub const PRESETS: [&str; 4] = ["constant", "sin1d", "checker2d", "product_nscale"];

impl MultiscaleCoefficient {
    /// Registers a custom coefficient. `epsilons` must be strictly
    /// decreasing in (0,1) and 0 < alpha ≤ beta.
    pub fn custom(
        name: impl Into<String>,
        d: usize,
        epsilons: Vec<f64>,
        alpha: f64,
        beta: f64,
        func: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("coefficient dimension must be at least 1"));
        }
        if !(alpha > 0.0 && beta >= alpha && beta.is_finite()) {
            return Err(Error::Ellipticity { detail: format!("need 0 < alpha <= beta, got alpha={alpha}, beta={beta}") });
        }
        for (k, &e) in epsilons.iter().enumerate() {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::invalid(format!("epsilon_{} = {e} is not in (0,1)", k + 1)));
            }
            if k > 0 && e >= epsilons[k - 1] {
                return Err(Error::invalid("epsilons must be strictly decreasing"));
            }
        }
        Ok(MultiscaleCoefficient { name: name.into(), d, epsilons, alpha, beta, func: Arc::new(func) })
    }

    /// Named preset. `epsilons` fixes the number of fine scales.
    ///
    /// * `constant`: a ≡ 1
    /// * `sin1d`: 2 + sin(2π y₁) in the first direction of the first scale
    /// * `checker2d`: 1 on even cells of a 2×2 checkerboard of Y₁, 10 on odd
    /// * `product_nscale`: ∏ₖ (3/2 + sin(2π Σᵢ yₖᵢ + 0.3))
    pub fn preset(name: &str, d: usize, epsilons: Vec<f64>) -> Result<Self> {
        let n = epsilons.len();
        match name {
            "constant" => Self::custom(name, d, epsilons, 1.0, 1.0, |_, _| 1.0),
            "sin1d" => {
                need_scales(name, n, 1)?;
                Self::custom(name, d, epsilons, 1.0, 3.0, |_, y| 2.0 + (2.0 * PI * y[0]).sin())
            }
            "checker2d" => {
                need_scales(name, n, 1)?;
                Self::custom(name, d, epsilons, 1.0, 10.0, move |_, y| {
                    let a = (2.0 * y[0].rem_euclid(1.0)).floor() as i64;
                    let b = if d > 1 { (2.0 * y[1].rem_euclid(1.0)).floor() as i64 } else { 0 };
                    if (a + b) % 2 == 0 {
                        1.0
                    } else {
                        10.0
                    }
                })
            }
            "product_nscale" => {
                need_scales(name, n, 1)?;
                let alpha = 0.5f64.powi(n as i32);
                let beta = 2.5f64.powi(n as i32);
                Self::custom(name, d, epsilons, alpha, beta, move |_, y| {
                    (0..n)
                        .map(|k| {
                            let s: f64 = y[k * d..(k + 1) * d].iter().sum();
                            1.5 + (2.0 * PI * s + 0.3).sin()
                        })
                        .product()
                })
            }
            _ => Err(Error::Config(format!("unknown coefficient preset '{name}'; known: {PRESETS:?}"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_scales(&self) -> usize {
        self.epsilons.len()
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    /// Finest scale εₙ, or 1 for a coefficient without fast variables.
    pub fn finest_scale(&self) -> f64 {
        self.epsilons.last().copied().unwrap_or(1.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.func)(x, y)
    }

    /// a(x, x/ε₁, …, x/εₙ).
    pub fn evaluate_canonical(&self, x: &[f64]) -> f64 {
        let mut y = Vec::with_capacity(self.d * self.epsilons.len());
        for &e in &self.epsilons {
            y.extend(x.iter().map(|&xi| xi / e));
        }
        (self.func)(x, &y)
    }

    /// Same coefficient with a different scale list.
    pub fn with_epsilons(&self, epsilons: Vec<f64>) -> Result<Self> {
        if epsilons.len() != self.epsilons.len() {
            return Err(Error::invalid("scale count cannot change"));
        }
        let mut c = self.clone();
        c.epsilons = epsilons;
        Ok(c)
    }

    /// Samples the coefficient at random points and checks
    /// α ≤ a ≤ β and 1-periodicity in every fast variable.
    pub fn check(&self, samples: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nd = self.d * self.epsilons.len();
        for _ in 0..samples {
            let x: Vec<f64> = (0..self.d).map(|_| rng.gen::<f64>()).collect();
            let y: Vec<f64> = (0..nd).map(|_| rng.gen::<f64>()).collect();
            let v = self.evaluate(&x, &y);
            if !(v >= self.alpha * (1.0 - 1e-12) && v <= self.beta * (1.0 + 1e-12)) {
                return Err(Error::Ellipticity {
                    detail: format!("a = {v} outside [{}, {}] at x={x:?}, y={y:?}", self.alpha, self.beta),
                });
            }
            for k in 0..nd {
                let mut y2 = y.clone();
                y2[k] += 1.0;
                let w = self.evaluate(&x, &y2);
                if (v - w).abs() > 1e-12 * v.abs().max(1.0) {
                    return Err(Error::invalid(format!("coefficient is not 1-periodic in fast variable {k}")));
                }
            }
        }
        Ok(())
    }
}

fn need_scales(name: &str, n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(Error::Config(format!("preset '{name}' needs at least {min} fine scale(s)")))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_elliptic_and_periodic() {
        for d in 1..=3 {
            for name in PRESETS {
                let eps = if name == "product_nscale" { vec![0.25, 0.0625] } else { vec![0.125] };
                let c = MultiscaleCoefficient::preset(name, d, eps).unwrap();
                c.check(300, 7).unwrap();
            }
        }
    }

    #[test]
    fn canonical_uses_fast_variable() {
        let c = MultiscaleCoefficient::preset("sin1d", 1, vec![0.25]).unwrap();
        assert!((c.evaluate_canonical(&[1.0 / 16.0]) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(MultiscaleCoefficient::custom("bad", 1, vec![], 0.0, 1.0, |_, _| 1.0).is_err());
        assert!(MultiscaleCoefficient::custom("bad", 1, vec![0.5, 0.6], 1.0, 1.0, |_, _| 1.0).is_err());
        assert!(MultiscaleCoefficient::preset("nope", 1, vec![0.5]).is_err());
    }

    #[test]
    fn check_catches_violation() {
        let c = MultiscaleCoefficient::custom("liar", 1, vec![0.5], 1.0, 2.0, |_, y| 1.0 + 3.0 * y[0].rem_euclid(1.0))
            .unwrap();
        assert!(c.check(100, 1).is_err());
    }
}
