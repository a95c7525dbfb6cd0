//! Least-squares power-law fits.

use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogLogFit {
    /// Exponent k in y ≈ C·x^k.
    pub slope: f64,
    /// ln C.
    pub intercept: f64,
    /// Root mean square residual in ln y.
    pub residual: f64,
}

/// Fits ln y = intercept + slope·ln x. Needs two or more points with
/// positive coordinates and at least two distinct x.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<LogLogFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { what: "fit data", left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::invalid("a power-law fit needs at least two points"));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("power-law fit needs positive finite data"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("power-law fit needs distinct abscissae"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    Ok(LogLogFit { slope, intercept, residual })
}

/// Slopes between consecutive points; the first entry is NaN.
pub fn running_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; x.len()];
    for i in 1..x.len() {
        out[i] = (y[i] / y[i - 1]).ln() / (x[i] / x[i - 1]).ln();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let x = [0.5, 0.25, 0.125, 0.0625];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-2.5)).collect();
        let f = fit_loglog(&x, &y).unwrap();
        assert!((f.slope + 2.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        let r = running_slopes(&x, &y);
        assert!(r[0].is_nan() && (r[3] + 2.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(fit_loglog(&[1.0], &[1.0]).is_err());
        assert!(fit_loglog(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(fit_loglog(&[1.0, 2.0], &[0.0, 2.0]).is_err());
    }
}
