//! Classical emulation of the Schrödingerization linear solver.
//!
//! `A u = F` becomes the steady state of `du/dt = -A u + F`. Appending the
//! constant 1 gives the homogeneous system `dũ/dt = -Ã ũ` with
//! `Ã = [[A, -F], [0ᵀ, 0]]`. The split `Ã = H₁ + i H₂` into Hermitian parts
//! and the warped phase `v(t, p) = e^{-p} ũ(t)` (extended evenly to p < 0)
//! turn this into `∂ₜ v = H₁ ∂ₚ v - i H₂ v`. On a periodic momentum grid
//! every Fourier mode `e^{i μ p}` evolves under the Hermitian generator
//! `G_μ = H₂ - μ H₁`, and ũ(t) is read back as `e^{p} v(t, p)` at some p > 0.

use crate::error::{Error, Result};
use crate::linalg::{ComplexVector, SparseMatrix};
use crate::spectral::{dense_eigenvalues, extreme_eigs, inverse_power_min, DENSE_CHECK_MAX};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;
use std::io::Write;

/// Largest extended dimension handled by the per-mode dense eigensolves.
pub const PIPELINE_MAX_DIM: usize = 1024;
/// Relative norm drift that signals a misconfigured integrator.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;
/// Largest momentum grid.
pub const MAX_MODES: usize = 1 << 22;

/// The homogeneous extended system dũ/dt = -Ã ũ.
#[derive(Clone, Debug)]
pub struct ExtendedOdeSystem {
    pub a_ext: SparseMatrix<f64>,
    pub u0_ext: Vec<f64>,
}

impl ExtendedOdeSystem {
    /// Dimension N + 1.
    pub fn dim(&self) -> usize {
        self.u0_ext.len()
    }
}

fn lambda_min_estimate(a: &SparseMatrix<f64>) -> Result<f64> {
    if a.n_rows() <= DENSE_CHECK_MAX {
        return Ok(dense_eigenvalues(a)?[0]);
    }
    match extreme_eigs(a, 1e-8) {
        Ok(e) => Ok(e.lambda_min),
        Err(Error::Singular { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Builds Ã = [[A, -F], [0ᵀ, 0]] and ũ₀ = [u₀; 1]. `a` must be symmetric
/// positive semi-definite.
pub fn extend_system(a: &SparseMatrix<f64>, f: &[f64], u0: &[f64]) -> Result<ExtendedOdeSystem> {
    let n = a.n_rows();
    if !a.is_square() || !a.check_symmetric() {
        return Err(Error::invalid("extend_system needs a symmetric matrix"));
    }
    if f.len() != n {
        return Err(Error::DimensionMismatch { what: "load vector", left: f.len(), right: n });
    }
    if u0.len() != n {
        return Err(Error::DimensionMismatch { what: "initial state", left: u0.len(), right: n });
    }
    let lmin = lambda_min_estimate(a)?;
    if lmin < -1e-10 {
        return Err(Error::Indefinite { lambda_min: lmin });
    }
    let trips = a
        .triplets()
        .chain(f.iter().enumerate().map(|(i, &v)| (i, n, -v)))
        .collect::<Vec<_>>();
    let a_ext = SparseMatrix::from_triplets(n + 1, n + 1, trips)?;
    let mut u0_ext = u0.to_vec();
    u0_ext.push(1.0);
    Ok(ExtendedOdeSystem { a_ext, u0_ext })
}

/// Ã = H₁ + i H₂ with H₁ = (Ã + Ãᵀ)/2 and H₂ = (Ã − Ãᵀ)/(2i) = i S,
/// S = −(Ã − Ãᵀ)/2 real antisymmetric.
#[derive(Clone, Debug)]
pub struct HermitianSplit {
    pub h1: SparseMatrix<f64>,
    /// S with H₂ = i S.
    pub h2_im: SparseMatrix<f64>,
}

impl HermitianSplit {
    /// H₂ as a dense complex matrix.
    pub fn h2_dense(&self) -> DMatrix<Complex64> {
        let n = self.h2_im.n_rows();
        let mut m = DMatrix::zeros(n, n);
        for (i, j, v) in self.h2_im.triplets() {
            m[(i, j)] = Complex64::new(0.0, v);
        }
        m
    }

    /// H₁ + i H₂ as (real part, imaginary part).
    pub fn reconstruct(&self) -> Result<(SparseMatrix<f64>, SparseMatrix<f64>)> {
        // i H₂ = i · i S = −S
        let re = self.h1.sub(&self.h2_im)?;
        let im = SparseMatrix::zeros(re.n_rows(), re.n_cols());
        Ok((re, im))
    }

    pub fn h1_max(&self) -> f64 {
        self.h1.max_entry()
    }

    pub fn h2_max(&self) -> f64 {
        self.h2_im.max_entry()
    }
}

pub fn hermitian_split(sys: &ExtendedOdeSystem) -> Result<HermitianSplit> {
    let at = sys.a_ext.transpose();
    let h1 = sys.a_ext.lin_comb(0.5, &at, 0.5)?;
    let h2_im = sys.a_ext.lin_comb(-0.5, &at, 0.5)?;
    Ok(HermitianSplit { h1, h2_im })
}

/// Fourier momenta μ_l = π l / p_max, l = −K/2, …, K/2 − 1, listed in DFT
/// order: entry m holds l = m for m < K/2 and l = m − K otherwise.
pub fn momentum_matrix(k: usize, p_max: f64) -> Result<Vec<f64>> {
    if k == 0 || k % 2 == 1 {
        return Err(Error::invalid(format!("momentum grid needs an even number of points, got {k}")));
    }
    if !(p_max > 0.0 && p_max.is_finite()) {
        return Err(Error::invalid("p_max must be positive"));
    }
    Ok((0..k)
        .map(|m| {
            let l = if m < k / 2 { m as f64 } else { m as f64 - k as f64 };
            std::f64::consts::PI * l / p_max
        })
        .collect())
}

/// Periodic momentum grid p_k = −p_max + k Δp, k = 0..K, with K Δp = 2 p_max.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentumGrid {
    pub p_max: f64,
    pub dp: f64,
    pub k: usize,
}

impl MomentumGrid {
    /// Grid with spacing at most `dp`, K rounded up to an even count.
    pub fn new(p_max: f64, dp: f64) -> Result<Self> {
        if !(p_max > 0.0 && dp > 0.0 && p_max.is_finite() && dp.is_finite()) {
            return Err(Error::invalid("momentum grid needs positive p_max and Δp"));
        }
        let raw = (2.0 * p_max / dp).ceil();
        if raw > MAX_MODES as f64 {
            return Err(Error::TooLarge { what: "momentum grid", n: raw as usize, limit: MAX_MODES });
        }
        let mut k = raw as usize;
        k += k % 2;
        k = k.max(2);
        Ok(MomentumGrid { p_max, dp: 2.0 * p_max / k as f64, k })
    }

    pub fn p(&self, k: usize) -> f64 {
        -self.p_max + k as f64 * self.dp
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.k).map(|k| self.p(k)).collect()
    }

    /// Index of the smallest grid point ≥ p.
    pub fn index_at_least(&self, p: f64) -> Result<usize> {
        let k = ((p + self.p_max) / self.dp - 1e-9).ceil().max(0.0) as usize;
        if k >= self.k {
            return Err(Error::invalid(format!("p = {p} lies beyond the grid end {}", self.p_max)));
        }
        Ok(k)
    }
}

/// w_k = e^{−|p_k|} ũ₀, stored with p outermost: block k is w(p_k).
pub fn initialize_w(u0_ext: &[f64], grid: &MomentumGrid) -> Result<ComplexVector> {
    let mut w = Vec::with_capacity(grid.k * u0_ext.len());
    for k in 0..grid.k {
        let s = (-grid.p(k).abs()).exp();
        w.extend(u0_ext.iter().map(|&u| Complex64::new(s * u, 0.0)));
    }
    ComplexVector::new(w)
}

/// Everything needed to evolve the warped system.
#[derive(Clone, Debug)]
pub struct SchrodingerizedSystem {
    pub split: HermitianSplit,
    pub grid: MomentumGrid,
    /// μ per DFT index.
    pub mu: Vec<f64>,
    pub w0: ComplexVector,
    pub dim: usize,
}

/// H_total in the Fourier representation, mode-major: block m is
/// G_m = H₂ − μ_m H₁, stored as real and imaginary parts.
#[derive(Clone, Debug)]
pub struct HTotal {
    pub re: SparseMatrix<f64>,
    pub im: SparseMatrix<f64>,
}

impl HTotal {
    fn row_pattern(&self, i: usize) -> usize {
        let (a, _) = self.re.row(i);
        let (b, _) = self.im.row(i);
        let (mut p, mut q, mut c) = (0, 0, 0);
        while p < a.len() || q < b.len() {
            if q == b.len() || (p < a.len() && a[p] < b[q]) {
                p += 1;
            } else if p == a.len() || b[q] < a[p] {
                q += 1;
            } else {
                p += 1;
                q += 1;
            }
            c += 1;
        }
        c
    }

    pub fn sparsity(&self) -> usize {
        (0..self.re.n_rows()).map(|i| self.row_pattern(i)).max().unwrap_or(0)
    }

    pub fn sparsity_over(&self, rows: impl IntoIterator<Item = usize>) -> usize {
        rows.into_iter().map(|i| self.row_pattern(i)).max().unwrap_or(0)
    }

    /// max |re + i im|.
    pub fn max_entry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.re.n_rows() {
            let (c, v) = self.re.row(i);
            for (&j, &x) in c.iter().zip(v) {
                m = m.max(Complex64::new(x, self.im.get(i, j)).norm());
            }
            let (c, v) = self.im.row(i);
            for (&j, &y) in c.iter().zip(v) {
                m = m.max(Complex64::new(self.re.get(i, j), y).norm());
            }
        }
        m
    }

    /// Largest |H − H†| entry.
    pub fn hermitian_defect(&self) -> f64 {
        let re_t = self.re.transpose();
        let im_t = self.im.transpose();
        self.re.max_abs_diff(&re_t).max(self.im.max_abs_diff(&im_t.scale(-1.0)))
    }
}

impl SchrodingerizedSystem {
    pub fn new(ext: &ExtendedOdeSystem, grid: MomentumGrid) -> Result<Self> {
        let dim = ext.dim();
        if dim > PIPELINE_MAX_DIM {
            return Err(Error::TooLarge { what: "Schrödingerized system", n: dim, limit: PIPELINE_MAX_DIM });
        }
        let split = hermitian_split(ext)?;
        let mu = momentum_matrix(grid.k, grid.p_max)?;
        let w0 = initialize_w(&ext.u0_ext, &grid)?;
        Ok(SchrodingerizedSystem { split, grid, mu, w0, dim })
    }

    /// Generator of DFT mode m as a dense Hermitian matrix.
    pub fn generator(&self, m: usize) -> DMatrix<Complex64> {
        let n = self.dim;
        let mut g = DMatrix::zeros(n, n);
        for (i, j, v) in self.split.h1.triplets() {
            g[(i, j)] += Complex64::new(-self.mu[m] * v, 0.0);
        }
        for (i, j, v) in self.split.h2_im.triplets() {
            g[(i, j)] += Complex64::new(0.0, v);
        }
        g
    }

    pub fn h_total(&self) -> Result<HTotal> {
        let n = self.dim;
        let total = n * self.grid.k;
        let mut re = Vec::new();
        let mut im = Vec::new();
        for (m, &mu) in self.mu.iter().enumerate() {
            let off = m * n;
            re.extend(self.split.h1.triplets().map(|(i, j, v)| (off + i, off + j, -mu * v)));
            im.extend(self.split.h2_im.triplets().map(|(i, j, v)| (off + i, off + j, v)));
        }
        Ok(HTotal { re: SparseMatrix::from_triplets(total, total, re)?, im: SparseMatrix::from_triplets(total, total, im)? })
    }

    /// Upper estimate max|μ|·‖H₁‖₂ + ‖H₂‖₂ of ‖H_total‖₂.
    pub fn norm_estimate(&self) -> Result<f64> {
        let e1 = dense_eigenvalues(&self.split.h1)?;
        let h1 = e1[0].abs().max(e1[e1.len() - 1].abs());
        let h2 = SymmetricEigen::new(self.split.h2_dense()).eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mu = self.mu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(mu * h1 + h2)
    }
}

/// Time integrator for the unitary evolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// exp(−i G t) through the eigendecomposition of each generator.
    Exact,
    /// Crank–Nicolson steps of size `dt_sim`; `None` picks 0.1/‖H_total‖₂.
    CrankNicolson { dt_sim: Option<f64> },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::CrankNicolson { dt_sim: None }
    }
}

/// Per-eigenvalue propagator factors for the requested times.
fn phase(lambda: f64, t: f64, steps: Option<(usize, f64)>) -> Complex64 {
    match steps {
        None => Complex64::from_polar(1.0, -lambda * t),
        Some((n, dt)) => {
            // Cayley factor (1 − iλΔt/2)/(1 + iλΔt/2) has modulus one
            let z = Complex64::new(1.0, -lambda * dt / 2.0) / Complex64::new(1.0, lambda * dt / 2.0);
            let arg = z.arg() * n as f64;
            Complex64::from_polar(1.0, arg)
        }
    }
}

fn fft_modes(w: &[Complex64], dim: usize, k: usize, inverse: bool) -> Vec<Complex64> {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(k) } else { planner.plan_fft_forward(k) };
    let mut out = vec![Complex64::new(0.0, 0.0); w.len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); k];
    let scale = if inverse { 1.0 / k as f64 } else { 1.0 };
    for j in 0..dim {
        for q in 0..k {
            buf[q] = w[q * dim + j];
        }
        fft.process(&mut buf);
        for q in 0..k {
            out[q * dim + j] = buf[q] * scale;
        }
    }
    out
}

/// Evolves w(0) to each of the given times. The Crank–Nicolson option
/// takes ⌈t/Δt_sim⌉ steps per time, applied in closed form per eigenvalue.
pub fn evolve_samples(sys: &SchrodingerizedSystem, times: &[f64], integ: Integrator) -> Result<Vec<ComplexVector>> {
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::invalid("evolution times must be non-negative"));
    }
    let steps: Vec<Option<(usize, f64)>> = match integ {
        Integrator::Exact => vec![None; times.len()],
        Integrator::CrankNicolson { dt_sim } => {
            let bound = 0.5 / sys.norm_estimate()?.max(f64::MIN_POSITIVE);
            let dt = match dt_sim {
                Some(d) if d > bound * (1.0 + 1e-12) => {
                    return Err(Error::invalid(format!("dt_sim = {d} exceeds 0.5/‖H_total‖ = {bound}")));
                }
                Some(d) if d > 0.0 => d,
                Some(d) => return Err(Error::invalid(format!("dt_sim must be positive, got {d}"))),
                None => 0.2 * bound,
            };
            times
                .iter()
                .map(|&t| {
                    let n = (t / dt).ceil() as usize;
                    if n == 0 {
                        None
                    } else {
                        Some((n, t / n as f64))
                    }
                })
                .collect()
        }
    };
    let n = sys.dim;
    let k = sys.grid.k;
    let hat = fft_modes(sys.w0.as_slice(), n, k, false);
    // per mode: eigendecompose once, propagate to every time
    let per_mode: Vec<Vec<Vec<Complex64>>> = (0..k)
        .into_par_iter()
        .map(|m| {
            let block = DVector::from_column_slice(&hat[m * n..(m + 1) * n]);
            let eig = SymmetricEigen::new(sys.generator(m));
            let coeff = eig.eigenvectors.adjoint() * &block;
            times
                .iter()
                .zip(&steps)
                .map(|(&t, &st)| {
                    let c = DVector::from_iterator(n, (0..n).map(|q| coeff[q] * phase(eig.eigenvalues[q], t, st)));
                    let v = &eig.eigenvectors * c;
                    v.iter().copied().collect()
                })
                .collect()
        })
        .collect();
    let norm0 = sys.w0.norm();
    let mut out = Vec::with_capacity(times.len());
    for ti in 0..times.len() {
        let mut h = vec![Complex64::new(0.0, 0.0); n * k];
        for m in 0..k {
            h[m * n..(m + 1) * n].copy_from_slice(&per_mode[m][ti]);
        }
        let w = ComplexVector::new(fft_modes(&h, n, k, true))?;
        let drift = (w.norm() - norm0).abs() / norm0;
        if drift > NORM_DRIFT_LIMIT {
            return Err(Error::NormDrift { drift });
        }
        out.push(w);
    }
    Ok(out)
}

/// w(t) ≈ exp(−i H_total t) w(0).
pub fn evolve(sys: &SchrodingerizedSystem, t: f64, integ: Integrator) -> Result<ComplexVector> {
    Ok(evolve_samples(sys, &[t], integ)?.remove(0))
}

/// exp(−i H t) w for a dense Hermitian H.
pub fn unitary_evolve(h: &DMatrix<Complex64>, w: &ComplexVector, t: f64) -> Result<ComplexVector> {
    let n = w.len();
    if h.nrows() != n || h.ncols() != n {
        return Err(Error::DimensionMismatch { what: "Hamiltonian vs state", left: h.nrows(), right: n });
    }
    let defect = (h - h.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let scale = h.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1.0);
    if defect > 1e-13 * scale {
        return Err(Error::invalid(format!("Hamiltonian is not Hermitian (defect {defect:e})")));
    }
    let eig = SymmetricEigen::new(h.clone());
    let v = DVector::from_column_slice(w.as_slice());
    let c = eig.eigenvectors.adjoint() * v;
    let c = DVector::from_iterator(n, (0..n).map(|q| c[q] * Complex64::from_polar(1.0, -eig.eigenvalues[q] * t)));
    let out = ComplexVector::new((&eig.eigenvectors * c).iter().copied().collect())?;
    let drift = (out.norm() - w.norm()).abs() / w.norm().max(f64::MIN_POSITIVE);
    if drift > NORM_DRIFT_LIMIT {
        return Err(Error::NormDrift { drift });
    }
    Ok(out)
}

/// ũ(t) ≈ e^{p_k} Re w(p_k), normalized so that its last entry is 1. Fails
/// when the unnormalized last entry is off by more than 0.1.
pub fn recover_u(w: &ComplexVector, grid: &MomentumGrid, index: usize, dim: usize) -> Result<Vec<f64>> {
    if index >= grid.k || w.len() != grid.k * dim {
        return Err(Error::invalid("recovery index or state length does not match the grid"));
    }
    let p = grid.p(index);
    if p <= 0.0 {
        return Err(Error::invalid(format!("recovery needs p > 0, got {p}")));
    }
    let s = p.exp();
    let u: Vec<f64> = (0..dim).map(|j| s * w[index * dim + j].re).collect();
    let last = u[dim - 1];
    if !((last - 1.0).abs() <= 0.1) {
        return Err(Error::Recovery { last });
    }
    Ok(u.iter().map(|v| v / last).collect())
}

/// Recovery point: the smallest grid p with p ≥ max(1, |λ_neg(H₁)| t + 1),
/// where information from the kink at p = 0 has not arrived.
pub fn recovery_p(lambda_neg: f64, t: f64) -> f64 {
    (lambda_neg.min(0.0).abs() * t + 1.0).max(1.0)
}

/// Smallest p_max for which the periodic images reaching the recovery
/// point p* carry weight below δ: 2 p_max ≥ 2 p* + λ_max(H₁) t + ln(1/δ).
pub fn required_p_max(p_star: f64, lambda_max: f64, t: f64, delta: f64) -> f64 {
    let ln = (1.0 / delta).ln();
    (2.0 + ln).max(p_star + 0.5 * (lambda_max.max(0.0) * t + ln))
}

/// Normalized l₂ norm ‖x‖₂/√n.
pub fn normalized_l2(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

/// Exact relaxation trajectory u(t) = u∞ + e^{−At}(u₀ − u∞) at the given
/// times, through a dense eigendecomposition.
pub fn relaxation_trajectory(a: &SparseMatrix<f64>, f: &[f64], u0: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = a.n_rows();
    if n > DENSE_CHECK_MAX {
        return Err(Error::TooLarge { what: "dense relaxation oracle", n, limit: DENSE_CHECK_MAX });
    }
    let mut m = DMatrix::zeros(n, n);
    for (i, j, v) in a.triplets() {
        m[(i, j)] = v;
    }
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::Indefinite { lambda_min: eig.eigenvalues.min() });
    }
    let q = &eig.eigenvectors;
    let fh = q.transpose() * DVector::from_column_slice(f);
    let uinf_h = DVector::from_iterator(n, (0..n).map(|i| fh[i] / eig.eigenvalues[i]));
    let d0 = q.transpose() * DVector::from_column_slice(u0) - &uinf_h;
    Ok(times
        .iter()
        .map(|&t| {
            let c = DVector::from_iterator(n, (0..n).map(|i| uinf_h[i] + (-eig.eigenvalues[i] * t).exp() * d0[i]));
            (q * c).iter().copied().collect()
        })
        .collect())
}

/// Normal equations LᵀL U = Lᵀ r for a nonsymmetric global system.
pub fn normal_equations(l: &SparseMatrix<f64>, rhs: &[f64]) -> Result<(SparseMatrix<f64>, Vec<f64>)> {
    let lt = l.transpose();
    let mut g = lt.matmul(l)?;
    // symmetrize away rounding in the product
    g = g.lin_comb(0.5, &g.transpose(), 0.5)?;
    Ok((g, lt.matvec(rhs)))
}

/// Parameters of the emulated pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PipelineOptions {
    pub delta: f64,
    /// Momentum spacing; defaults to δ.
    pub dp: Option<f64>,
    /// Momentum cutoff; defaults to [`required_p_max`].
    pub p_max: Option<f64>,
    /// Evolution time; defaults to ln(1/δ)/λ_min.
    pub t: Option<f64>,
    pub integrator: Integrator,
    /// Relax on the normal equations (for nonsymmetric systems).
    pub normal_equations: bool,
    /// Number of trace samples on (0, t].
    pub trace_samples: usize,
    /// Cap on the number of momentum modes, at most [`MAX_MODES`].
    pub max_modes: usize,
}

impl PipelineOptions {
    pub fn new(delta: f64) -> Self {
        PipelineOptions {
            delta,
            dp: None,
            p_max: None,
            t: None,
            integrator: Integrator::default(),
            normal_equations: false,
            trace_samples: 0,
            max_modes: MAX_MODES,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub t: f64,
    pub w_norm: f64,
    /// Normalized l₂ distance of the recovered u(t) to the exact trajectory.
    pub error: f64,
    /// Normalized l₂ distance of the recovered u(t) to the steady state.
    pub distance_to_steady: f64,
}

/// Outcome of one emulated solve.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub u: Vec<f64>,
    pub t: f64,
    pub lambda_min: f64,
    pub lambda_max_h1: f64,
    pub lambda_neg_h1: f64,
    pub grid: MomentumGrid,
    pub recovery_p: f64,
    pub check_p: f64,
    /// Normalized l₂ gap between the recoveries at the two points.
    pub cross_check_gap: f64,
    pub norm_drift: f64,
    pub h_total_max: f64,
    pub h_total_sparsity: Option<usize>,
    pub a_ext_sparsity: usize,
    pub a_ext_max: f64,
    /// The operator relaxed on is LᵀL, so its condition number is squared.
    pub squared_condition: bool,
    pub trace: Vec<TracePoint>,
}

/// Largest grid for which H_total is formed explicitly for measurement.
const H_TOTAL_MEASURE_MAX: usize = 2_000_000;

/// Solves a u = f with u₀ = 0 through extend → split → lift → evolve →
/// recover.
pub fn schrodinger_solve(a: &SparseMatrix<f64>, f: &[f64], opts: &PipelineOptions) -> Result<PipelineReport> {
    if !(opts.delta > 0.0 && opts.delta < 1.0) {
        return Err(Error::invalid(format!("δ must lie in (0, 1), got {}", opts.delta)));
    }
    let (op, rhs, squared) = if opts.normal_equations {
        let (g, r) = normal_equations(a, f)?;
        (g, r, true)
    } else {
        (a.clone(), f.to_vec(), false)
    };
    let n = op.n_rows();
    let u0 = vec![0.0; n];
    let ext = extend_system(&op, &rhs, &u0)?;
    let lambda_min = inverse_power_min(&op, 1e-6)?;
    let t = opts.t.unwrap_or((1.0 / opts.delta).ln() / lambda_min);
    let split = hermitian_split(&ext)?;
    let e1 = dense_eigenvalues(&split.h1)?;
    let (lneg, lmax) = (e1[0], e1[e1.len() - 1]);
    let p_star = recovery_p(lneg, t);
    let p_check = p_star + 1.0;
    let p_max = opts.p_max.unwrap_or_else(|| required_p_max(p_check, lmax, t, opts.delta));
    let grid = MomentumGrid::new(p_max, opts.dp.unwrap_or(opts.delta))?;
    if grid.k > opts.max_modes {
        return Err(Error::TooLarge { what: "momentum grid", n: grid.k, limit: opts.max_modes });
    }
    let sys = SchrodingerizedSystem::new(&ext, grid)?;
    let k_star = grid.index_at_least(p_star)?;
    let k_check = grid.index_at_least(p_check)?;

    let mut times: Vec<f64> = (1..=opts.trace_samples).map(|j| t * j as f64 / opts.trace_samples as f64).collect();
    times.push(t);
    let states = evolve_samples(&sys, &times, opts.integrator)?;
    let w_t = states.last().expect("final state");
    let norm0 = sys.w0.norm();
    let norm_drift = (w_t.norm() - norm0).abs() / norm0;
    let u_ext = recover_u(w_t, &grid, k_star, ext.dim())?;
    let u_chk = recover_u(w_t, &grid, k_check, ext.dim())?;
    let gap: Vec<f64> = u_ext.iter().zip(&u_chk).map(|(p, q)| p - q).collect();

    let mut trace = Vec::new();
    if opts.trace_samples > 0 {
        let exact = relaxation_trajectory(&op, &rhs, &u0, &times[..opts.trace_samples])?;
        let steady = relaxation_trajectory(&op, &rhs, &u0, &[f64::INFINITY]).ok();
        for (j, w) in states[..opts.trace_samples].iter().enumerate() {
            let u = recover_u(w, &grid, k_star, ext.dim())?;
            let err: Vec<f64> = u[..n].iter().zip(&exact[j]).map(|(p, q)| p - q).collect();
            let dist = steady
                .as_ref()
                .map(|s| normalized_l2(&u[..n].iter().zip(&s[0]).map(|(p, q)| p - q).collect::<Vec<_>>()))
                .unwrap_or(f64::NAN);
            trace.push(TracePoint { t: times[j], w_norm: w.norm(), error: normalized_l2(&err), distance_to_steady: dist });
        }
    }

    let (h_total_max, h_total_sparsity) = if grid.k * ext.dim() <= H_TOTAL_MEASURE_MAX {
        let h = sys.h_total()?;
        (h.max_entry(), Some(h.sparsity_over((0..grid.k).flat_map(|m| (0..n).map(move |i| m * (n + 1) + i)))))
    } else {
        let mu = sys.mu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (mu * split.h1_max() + split.h2_max(), None)
    };

    Ok(PipelineReport {
        u: u_ext[..n].to_vec(),
        t,
        lambda_min,
        lambda_max_h1: lmax,
        lambda_neg_h1: lneg,
        grid,
        recovery_p: grid.p(k_star),
        check_p: grid.p(k_check),
        cross_check_gap: normalized_l2(&gap),
        norm_drift,
        h_total_max,
        h_total_sparsity,
        a_ext_sparsity: ext.a_ext.sparsity_over(0..n),
        a_ext_max: ext.a_ext.max_entry(),
        squared_condition: squared,
        trace,
    })
}

/// How [`relaxation_solve`] evolves the ODE.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RelaxationMethod {
    /// Dense eigendecomposition of A.
    Exact,
    /// The emulated pipeline.
    Schrodinger(PipelineOptions),
}

#[derive(Clone, Debug)]
pub struct RelaxationResult {
    pub u: Vec<f64>,
    pub t_star: f64,
    pub lambda_min: f64,
}

/// Evolves du/dt = −A u + F from u₀ to t* = ln(1/δ)/λ_min, so that
/// ‖u − u∞‖ ≤ δ ‖u₀ − u∞‖.
pub fn relaxation_solve(
    a: &SparseMatrix<f64>,
    f: &[f64],
    u0: &[f64],
    delta: f64,
    method: RelaxationMethod,
) -> Result<RelaxationResult> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("δ must lie in (0, 1), got {delta}")));
    }
    let lambda_min = match inverse_power_min(a, 1e-6) {
        Ok(l) => l,
        Err(Error::Singular { .. }) => return Err(Error::Indefinite { lambda_min: 0.0 }),
        Err(e) => return Err(e),
    };
    if lambda_min <= 0.0 {
        return Err(Error::Indefinite { lambda_min });
    }
    // already at the steady state
    let r: Vec<f64> = a.matvec(u0).iter().zip(f).map(|(p, q)| p - q).collect();
    let scale = normalized_l2(f).max(normalized_l2(&a.matvec(u0))).max(f64::MIN_POSITIVE);
    if normalized_l2(&r) <= 1e-14 * scale {
        return Ok(RelaxationResult { u: u0.to_vec(), t_star: 0.0, lambda_min });
    }
    let t_star = (1.0 / delta).ln() / lambda_min;
    let u = match method {
        RelaxationMethod::Exact => relaxation_trajectory(a, f, u0, &[t_star])?.remove(0),
        RelaxationMethod::Schrodinger(opts) => {
            if u0.iter().any(|&v| v != 0.0) {
                // shift so that the pipeline starts from zero
                let au0 = a.matvec(u0);
                let g: Vec<f64> = f.iter().zip(&au0).map(|(p, q)| p - q).collect();
                let rep = schrodinger_solve(a, &g, &PipelineOptions { t: Some(t_star), ..opts })?;
                rep.u.iter().zip(u0).map(|(p, q)| p + q).collect()
            } else {
                schrodinger_solve(a, f, &PipelineOptions { t: Some(t_star), ..opts })?.u
            }
        }
    };
    Ok(RelaxationResult { u, t_star, lambda_min })
}

/// Writes the pipeline trace as CSV.
pub fn write_trace_csv<W: Write>(trace: &[TracePoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "w_norm", "error", "distance_to_steady"])?;
    for p in trace {
        out.write_record([
            format!("{:.10e}", p.t),
            format!("{:.10e}", p.w_norm),
            format!("{:.10e}", p.error),
            format!("{:.10e}", p.distance_to_steady),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_extension() {
        let a = SparseMatrix::from_dense(&[vec![1.0]]);
        let ext = extend_system(&a, &[0.0], &[1.0]).unwrap();
        assert_eq!(ext.a_ext.to_dense(), vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(ext.u0_ext, vec![1.0, 1.0]);
    }

    #[test]
    fn split_of_bordered_matrix() {
        let ext = ExtendedOdeSystem { a_ext: SparseMatrix::from_dense(&[vec![1.0, 3.0], vec![0.0, 0.0]]), u0_ext: vec![0.0, 1.0] };
        let s = hermitian_split(&ext).unwrap();
        assert_eq!(s.h1.to_dense(), vec![vec![1.0, 1.5], vec![1.5, 0.0]]);
        assert_eq!(s.h2_im.to_dense(), vec![vec![0.0, -1.5], vec![1.5, 0.0]]);
        let (re, _) = s.reconstruct().unwrap();
        assert!(re.max_abs_diff(&ext.a_ext) < 1e-15);
    }

    #[test]
    fn two_mode_momenta() {
        let mu = momentum_matrix(2, std::f64::consts::PI).unwrap();
        assert_eq!(mu, vec![0.0, -1.0]);
        assert!(momentum_matrix(3, 1.0).is_err());
    }

    #[test]
    fn rabi_rotation() {
        let z = Complex64::new(0.0, 0.0);
        let o = Complex64::new(1.0, 0.0);
        let h = DMatrix::from_row_slice(2, 2, &[z, o, o, z]);
        let w = ComplexVector::new(vec![o, z]).unwrap();
        let t = std::f64::consts::FRAC_PI_2;
        let out = unitary_evolve(&h, &w, t).unwrap();
        assert!(out[0].norm() < 1e-14);
        assert!((out[1] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn recovery_at_time_zero() {
        let grid = MomentumGrid::new(4.0, 0.1).unwrap();
        let u0 = [0.3, -1.2, 1.0];
        let w = initialize_w(&u0, &grid).unwrap();
        let k = grid.index_at_least(1.0).unwrap();
        let u = recover_u(&w, &grid, k, 3).unwrap();
        for (p, q) in u.iter().zip(&u0) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}
