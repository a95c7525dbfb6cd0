//! Cell problems, two-scale reconstruction and homogenization error rates.

use crate::error::{Error, Result};
use crate::fem::assembly::{assemble_product, FieldSpec, OwnNodes, ProductLayout};
use crate::fem::{
    assemble_canonical, assemble_force, mass_d, AssemblyOptions, FemSolution, Level, MultiscaleCoefficient, TensorMesh,
};
use crate::fit::{fit_loglog, running_slopes, LogLogFit};
use crate::linalg::{cg_solve, factorize, SparseMatrix};
use crate::time::BlockTimeSystem;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest periodic cell mesh per direction for d ≥ 2.
pub const MAX_CELL_MESH: usize = 64;

/// How a corrector's additive constant was fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectorNormalization {
    /// Zero mean over Y (standalone cell solvers).
    MeanZero,
    /// Zero on ∂Y (lifted solve).
    BoundaryPinned,
}

/// Solution of the periodic cell problems -div(a(e_j + ∇χ_j)) = 0 on Y.
#[derive(Clone, Debug)]
pub struct CellProblemResult {
    pub d: usize,
    /// Periodic mesh cells per direction on Y.
    pub cells: usize,
    /// χ_j at the periodic nodes (row-major, `cells^d` values), one per direction.
    pub correctors: Vec<Vec<f64>>,
    pub homogenized_tensor: Vec<Vec<f64>>,
    /// Trace of the tensor over d; the coefficient itself when isotropic.
    pub homogenized_coeff: f64,
    pub normalization: CorrectorNormalization,
}

impl CellProblemResult {
    /// χ_j(y) by periodic multilinear interpolation.
    pub fn corrector(&self, j: usize, y: &[f64]) -> f64 {
        self.interp(j, y, None)
    }

    /// ∂χ_j/∂y_k of the interpolant.
    pub fn corrector_derivative(&self, j: usize, k: usize, y: &[f64]) -> f64 {
        self.interp(j, y, Some(k))
    }

    fn interp(&self, j: usize, y: &[f64], deriv: Option<usize>) -> f64 {
        let m = self.cells;
        let mut cell = vec![0usize; self.d];
        let mut t = vec![0.0; self.d];
        for q in 0..self.d {
            let s = y[q].rem_euclid(1.0) * m as f64;
            cell[q] = (s.floor() as usize).min(m - 1);
            t[q] = s - cell[q] as f64;
        }
        let mut v = 0.0;
        for pattern in 0..(1usize << self.d) {
            let mut idx = 0;
            let mut w = 1.0;
            for q in 0..self.d {
                let bit = (pattern >> (self.d - 1 - q)) & 1;
                idx = idx * m + (cell[q] + bit) % m;
                w *= match (deriv == Some(q), bit) {
                    (true, 0) => -(m as f64),
                    (true, _) => m as f64,
                    (false, 0) => 1.0 - t[q],
                    (false, _) => t[q],
                };
            }
            v += w * self.correctors[j][idx];
        }
        v
    }
}

/// Adaptive Simpson quadrature on [a, b].
pub(crate) fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            left + right + diff / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// (∫₀¹ a⁻¹)⁻¹, the one-dimensional homogenized coefficient.
pub fn harmonic_mean(a: &dyn Fn(f64) -> f64) -> f64 {
    1.0 / integrate(&|y| 1.0 / a(y), 0.0, 1.0, 1e-14)
}

/// Closed-form 1D cell problem: A₀ = (∫₀¹ a⁻¹)⁻¹ and χ' = A₀/a − 1,
/// sampled at `cells` periodic nodes and shifted to zero mean.
pub fn cell_problem_1d(a: &dyn Fn(f64) -> f64, cells: usize) -> Result<CellProblemResult> {
    if cells < 2 {
        return Err(Error::invalid("cell mesh needs at least two cells"));
    }
    let probe = 4 * cells.max(256);
    let amin = (0..probe).map(|i| a((i as f64 + 0.5) / probe as f64)).fold(f64::INFINITY, f64::min);
    if !(amin > 0.0 && amin.is_finite()) {
        return Err(Error::Ellipticity { detail: format!("cell coefficient reaches {amin}, not bounded away from 0") });
    }
    let inv = |y: f64| 1.0 / a(y);
    // per-interval integrals of 1/a give both A₀ and χ
    let pieces: Vec<f64> =
        (0..cells).map(|i| integrate(&inv, i as f64 / cells as f64, (i + 1) as f64 / cells as f64, 1e-15)).collect();
    let total: f64 = pieces.iter().sum();
    let a0 = 1.0 / total;
    let mut chi = Vec::with_capacity(cells);
    let mut acc = 0.0;
    for (i, p) in pieces.iter().enumerate() {
        chi.push(a0 * acc - i as f64 / cells as f64);
        acc += p;
    }
    let mean = chi.iter().sum::<f64>() / cells as f64;
    chi.iter_mut().for_each(|v| *v -= mean);
    Ok(CellProblemResult {
        d: 1,
        cells,
        correctors: vec![chi],
        homogenized_tensor: vec![vec![a0]],
        homogenized_coeff: a0,
        normalization: CorrectorNormalization::MeanZero,
    })
}

/// Periodic finite element cell problem on Y = [0,1]^d with `cells` cells
/// per direction. One node is pinned while solving, then the mean is removed.
pub fn cell_problem_fem(a: &(dyn Fn(&[f64]) -> f64 + Sync), d: usize, cells: usize) -> Result<CellProblemResult> {
    if d == 0 || cells < 2 {
        return Err(Error::invalid("cell problem needs d >= 1 and at least two cells"));
    }
    if d >= 2 && cells > MAX_CELL_MESH {
        return Err(Error::TooLarge { what: "periodic cell mesh", n: cells, limit: MAX_CELL_MESH });
    }
    let layout = ProductLayout::new(d, 1, cells, vec![FieldSpec { level: 0, own: OwnNodes::Periodic }])?;
    let sub = (16usize.div_ceil(cells)).max(3);
    let k: SparseMatrix<f64> = assemble_product(&layout, &vec![sub; d], a)?;
    let n = k.n_rows();
    let h = 1.0 / cells as f64;

    // b[j][i] = −∫ a ∂_j φ_i and ∫ a, with a constant on each sub-cell
    let mut b = vec![vec![0.0; n]; d];
    let mut mean_a = 0.0;
    let n_cells = cells.pow(d as u32);
    let n_sub = sub.pow(d as u32);
    let w = (h / sub as f64).powi(d as i32);
    let mut c = vec![0usize; d];
    let mut t = vec![0.0; d];
    let mut y = vec![0.0; d];
    for flat in 0..n_cells {
        let mut r = flat;
        for q in (0..d).rev() {
            c[q] = r % cells;
            r /= cells;
        }
        for s in 0..n_sub {
            let mut r = s;
            for q in (0..d).rev() {
                t[q] = ((r % sub) as f64 + 0.5) / sub as f64;
                r /= sub;
                y[q] = (c[q] as f64 + t[q]) * h;
            }
            let av = a(&y) * w;
            mean_a += av;
            for pattern in 0..(1usize << d) {
                let mut idx = 0;
                let mut vals = 1.0;
                let mut bits = [0usize; 8];
                for q in 0..d {
                    let bit = (pattern >> (d - 1 - q)) & 1;
                    bits[q] = bit;
                    idx = idx * cells + (c[q] + bit) % cells;
                    vals *= if bit == 0 { 1.0 - t[q] } else { t[q] };
                }
                for (j, bj) in b.iter_mut().enumerate() {
                    // ∂_j of the corner basis: replace the j factor by ±1/h
                    let other = if bits[j] == 0 { 1.0 - t[j] } else { t[j] };
                    let dj = if bits[j] == 0 { -1.0 / h } else { 1.0 / h };
                    let g = if other == 0.0 { 0.0 } else { vals / other * dj };
                    bj[idx] -= av * g;
                }
            }
        }
    }
    let reduced = k.submatrix(1..n, 1..n);
    let mut correctors = Vec::with_capacity(d);
    for bj in &b {
        let (x, _) = cg_solve(&reduced, &bj[1..], 1e-12)?;
        let mut chi = Vec::with_capacity(n);
        chi.push(0.0);
        chi.extend(x);
        let mean = chi.iter().sum::<f64>() / n as f64;
        chi.iter_mut().for_each(|v| *v -= mean);
        correctors.push(chi);
    }
    let mut tensor = vec![vec![0.0; d]; d];
    for (j, row) in tensor.iter_mut().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            let cross: f64 = b[k].iter().zip(&correctors[j]).map(|(p, q)| p * q).sum();
            *v = if j == k { mean_a } else { 0.0 } - cross;
        }
    }
    let coeff = (0..d).map(|j| tensor[j][j]).sum::<f64>() / d as f64;
    Ok(CellProblemResult {
        d,
        cells,
        correctors,
        homogenized_tensor: tensor,
        homogenized_coeff: coeff,
        normalization: CorrectorNormalization::MeanZero,
    })
}

/// Homogenized coefficient at each macro point, solving the cell problems
/// in parallel; results keep the order of `points`.
pub fn homogenized_coefficients(coef: &MultiscaleCoefficient, points: &[Vec<f64>], cells: usize) -> Result<Vec<f64>> {
    if coef.n_scales() != 1 {
        return Err(Error::invalid("cell problems need exactly one fine scale"));
    }
    points
        .par_iter()
        .map(|x| {
            if coef.d() == 1 {
                cell_problem_1d(&|y| coef.evaluate(x, &[y]), cells).map(|r| r.homogenized_coeff)
            } else {
                cell_problem_fem(&|y| coef.evaluate(x, y), coef.d(), cells).map(|r| r.homogenized_coeff)
            }
        })
        .collect()
}

/// First-order two-scale reconstruction u₀(x) + ε u₁(x, x/ε).
#[derive(Clone, Debug)]
pub struct Reconstruction<'a> {
    u0: &'a FemSolution<f64>,
    u1: &'a FemSolution<f64>,
    eps: f64,
}

/// Builds the reconstruction from the lifted solution pair (u₀, u₁).
pub fn reconstruct_two_scale<'a>(
    u0: &'a FemSolution<f64>,
    u1: &'a FemSolution<f64>,
    eps: f64,
) -> Result<Reconstruction<'a>> {
    if u0.level != Level::Homogenized(0) || u1.level != Level::Homogenized(1) {
        return Err(Error::invalid("reconstruction expects u0 at level 0 and u1 at level 1"));
    }
    if u0.mesh != u1.mesh {
        return Err(Error::invalid("u0 and u1 live on different meshes"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("epsilon {eps} is not in (0,1)")));
    }
    Ok(Reconstruction { u0, u1, eps })
}

impl Reconstruction<'_> {
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let base = crate::fem::evaluate_p1(&self.u0.mesh, &self.u0.coefficients, x)?;
        let y: Vec<f64> = x.iter().map(|v| (v / self.eps).rem_euclid(1.0)).collect();
        Ok(base + self.eps * self.corrector_at(x, &y))
    }

    /// u₁(x, y) from the lifted nodal values: macro factors on nodes
    /// 0..=N+1 scaled by h^{-1/2} per direction, y factors on interior nodes.
    pub fn corrector_at(&self, x: &[f64], y: &[f64]) -> f64 {
        let mesh = &self.u1.mesh;
        let d = mesh.d();
        let n = mesh.n();
        let cells = mesh.cells();
        let locate = |v: f64| {
            let s = v.clamp(0.0, 1.0) * cells as f64;
            let c = (s.floor() as usize).min(cells - 1);
            (c, s - c as f64)
        };
        let xc: Vec<(usize, f64)> = x.iter().map(|&v| locate(v)).collect();
        let yc: Vec<(usize, f64)> = y.iter().map(|&v| locate(v)).collect();
        let scale = mesh.h().powf(-0.5 * d as f64);
        let own = n.pow(d as u32);
        let mut total = 0.0;
        for px in 0..(1usize << d) {
            let mut mi = 0;
            let mut wx = 1.0;
            for q in 0..d {
                let bit = (px >> (d - 1 - q)) & 1;
                mi = mi * (n + 2) + xc[q].0 + bit;
                wx *= if bit == 0 { 1.0 - xc[q].1 } else { xc[q].1 };
            }
            'corner: for py in 0..(1usize << d) {
                let mut oi = 0;
                let mut wy = 1.0;
                for q in 0..d {
                    let bit = (py >> (d - 1 - q)) & 1;
                    let node = yc[q].0 + bit;
                    if node == 0 || node == n + 1 {
                        continue 'corner;
                    }
                    oi = oi * n + node - 1;
                    wy *= if bit == 0 { 1.0 - yc[q].1 } else { yc[q].1 };
                }
                total += wx * wy * self.u1.coefficients[mi * own + oi];
            }
        }
        total * scale
    }
}

/// Samples of the 1D homogenized coefficient x ↦ A₀(x) for linear
/// interpolation.
const A0_TABLE: usize = 1024;

/// Macroscopic coefficient A₀(x) of a 1D coefficient with one fine scale,
/// tabulated on a uniform grid of x and interpolated linearly.
pub fn homogenized_1d(coef: &MultiscaleCoefficient) -> Result<MultiscaleCoefficient> {
    if coef.d() != 1 || coef.n_scales() != 1 {
        return Err(Error::invalid("the tabulated homogenized coefficient needs d = 1 and one fine scale"));
    }
    let table: Vec<f64> = (0..=A0_TABLE)
        .into_par_iter()
        .map(|i| {
            let x = [i as f64 / A0_TABLE as f64];
            harmonic_mean(&|y| coef.evaluate(&x, &[y]))
        })
        .collect();
    let lo = table.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = table.iter().cloned().fold(0.0, f64::max);
    MultiscaleCoefficient::custom(format!("{}_homogenized", coef.name()), 1, vec![], lo, hi, move |x, _| {
        let s = x[0].clamp(0.0, 1.0) * A0_TABLE as f64;
        let i = (s.floor() as usize).min(A0_TABLE - 1);
        let t = s - i as f64;
        (1.0 - t) * table[i] + t * table[i + 1]
    })
}

/// One sweep point of a homogenization error study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub epsilon: f64,
    pub h_ref: f64,
    pub h_hom: f64,
    pub err_l2: f64,
    pub err_h1: f64,
    pub slope_running: f64,
}

/// Fitted rate of an error sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub points: Vec<RatePoint>,
    pub fit: LogLogFit,
    /// Set when the errors do not decrease monotonically with ε.
    pub warning: Option<String>,
}

/// Least-squares slope of ln err against ln ε over at least four points.
pub fn homogenization_error_rate(eps: &[f64], err: &[f64]) -> Result<(LogLogFit, Option<String>)> {
    if eps.len() < 4 {
        return Err(Error::invalid(format!("rate fit needs at least 4 sweep points, got {}", eps.len())));
    }
    let fit = fit_loglog(eps, err)?;
    let mut order: Vec<usize> = (0..eps.len()).collect();
    order.sort_by(|&a, &b| eps[b].total_cmp(&eps[a]));
    let monotone = order.windows(2).all(|w| err[w[1]] <= err[w[0]]);
    let warning = (!monotone).then(|| "error sequence is not monotone in epsilon".to_string());
    Ok((fit, warning))
}

/// Which model problem a rate sweep solves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateProblem {
    Elliptic,
    Parabolic,
    Wave,
}

/// Settings of a one-dimensional homogenization sweep.
#[derive(Clone, Debug)]
pub struct RateSweep {
    pub problem: RateProblem,
    pub epsilons: Vec<f64>,
    /// Reference mesh size is ε / `resolution`.
    pub resolution: usize,
    pub final_time: f64,
    pub dt: f64,
}

impl RateSweep {
    pub fn new(problem: RateProblem, epsilons: Vec<f64>) -> Self {
        let (final_time, dt) = match problem {
            RateProblem::Elliptic => (0.0, 0.0),
            RateProblem::Parabolic => (0.25, 1.0 / 400.0),
            RateProblem::Wave => (1.0, 1.0 / 400.0),
        };
        RateSweep { problem, epsilons, resolution: 128, final_time, dt }
    }
}

/// Smooth bump supported in [1/4, 3/4].
pub fn bump(x: f64) -> f64 {
    let s = (x - 0.5) / 0.25;
    if s.abs() < 1.0 {
        (1.0 - s * s).powi(4)
    } else {
        0.0
    }
}

/// ‖u_ε − u₀‖ sweep for a 1D coefficient with one fine scale. Both
/// solutions live on the reference mesh h = ε/resolution; u₀ uses the
/// harmonic-mean coefficient. Elliptic and parabolic problems use f ≡ 1
/// and zero initial data; the wave problem uses f ≡ 0, u(0) = bump, v(0) = 0.
/// Time-dependent errors are the maximum over all steps.
pub fn rate_sweep(coef: &MultiscaleCoefficient, sweep: &RateSweep) -> Result<RateReport> {
    if coef.d() != 1 || coef.n_scales() != 1 {
        return Err(Error::invalid("rate sweeps use d = 1 and one fine scale"));
    }
    let mut points = Vec::with_capacity(sweep.epsilons.len());
    for &eps in &sweep.epsilons {
        let c = coef.with_epsilons(vec![eps])?;
        let cells = (sweep.resolution as f64 / eps).round() as usize;
        let mesh = TensorMesh::with_cells(1, cells)?;
        let opts = AssemblyOptions::default();
        let a_eps: SparseMatrix<f64> = assemble_canonical(&c, &mesh, &opts)?;
        let hom = homogenized_1d(&c)?;
        let a_hom: SparseMatrix<f64> = assemble_canonical(&hom, &mesh, &opts)?;
        let m: SparseMatrix<f64> = mass_d(&mesh)?;
        let (e_l2, e_h1) = match sweep.problem {
            RateProblem::Elliptic => {
                let f: Vec<f64> = assemble_force(&|_| 1.0, &mesh)?;
                let ue = factorize(&a_eps)?.solve(&f);
                let u0 = factorize(&a_hom)?.solve(&f);
                norms(&m, &a_hom, &ue, &u0)
            }
            RateProblem::Parabolic | RateProblem::Wave => {
                let n_steps = (sweep.final_time / sweep.dt).round() as usize;
                let n = mesh.dof()?;
                let run = |a: &SparseMatrix<f64>| -> Result<Vec<Vec<f64>>> {
                    let sys = if sweep.problem == RateProblem::Parabolic {
                        let f: Vec<f64> = assemble_force(&|_| 1.0, &mesh)?;
                        BlockTimeSystem::parabolic_canonical(&m, a, sweep.dt, n_steps, &move |_| f.clone(), &vec![0.0; n])?
                    } else {
                        let u0: Vec<f64> = crate::fem::interpolate(&|x| bump(x[0]), &mesh)?;
                        BlockTimeSystem::wave_canonical(&m, a, sweep.dt, n_steps, &|_| vec![0.0; n], &u0, &vec![0.0; n])?
                    };
                    let r = sys.u_range.clone();
                    Ok(sys.march_reference()?.into_iter().map(|s| s[r.clone()].to_vec()).collect())
                };
                let te = run(&a_eps)?;
                let t0 = run(&a_hom)?;
                te.iter().zip(&t0).map(|(p, q)| norms(&m, &a_hom, p, q)).fold((0.0f64, 0.0f64), |acc, v| {
                    (acc.0.max(v.0), acc.1.max(v.1))
                })
            }
        };
        points.push(RatePoint { epsilon: eps, h_ref: mesh.h(), h_hom: mesh.h(), err_l2: e_l2, err_h1: e_h1, slope_running: f64::NAN });
    }
    let eps: Vec<f64> = points.iter().map(|p| p.epsilon).collect();
    let err: Vec<f64> = points.iter().map(|p| p.err_l2).collect();
    for (p, s) in points.iter_mut().zip(running_slopes(&eps, &err)) {
        p.slope_running = s;
    }
    let (fit, warning) = homogenization_error_rate(&eps, &err)?;
    Ok(RateReport { points, fit, warning })
}

pub const RATE_HEADER: [&str; 6] = ["epsilon", "h_ref", "h_hom", "err_L2", "err_H1", "slope_running"];

/// Writes the sweep points as CSV, one row per ε.
pub fn write_rate_csv<W: std::io::Write>(points: &[RatePoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RATE_HEADER)?;
    for p in points {
        out.write_record(
            [p.epsilon, p.h_ref, p.h_hom, p.err_l2, p.err_h1, p.slope_running].iter().map(|v| format!("{v:.10e}")),
        )?;
    }
    out.flush()?;
    Ok(())
}

/// L² norm via the mass matrix and the energy-type H¹ seminorm via the
/// homogenized stiffness (scaled by 1/A₀ is not needed for rates).
fn norms(m: &SparseMatrix<f64>, a: &SparseMatrix<f64>, u: &[f64], v: &[f64]) -> (f64, f64) {
    let e: Vec<f64> = u.iter().zip(v).map(|(p, q)| p - q).collect();
    let me = m.matvec(&e);
    let ae = a.matvec(&e);
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    (dot(&e, &me).max(0.0).sqrt(), dot(&e, &ae).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_cell_problem() {
        let r = cell_problem_1d(&|_| 2.5, 32).unwrap();
        assert!((r.homogenized_coeff - 2.5).abs() < 1e-14);
        assert!(r.correctors[0].iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn harmonic_means() {
        let r = cell_problem_1d(&|y| 1.0 / (2.0 + (2.0 * PI * y).sin()), 64).unwrap();
        assert!((r.homogenized_coeff - 0.5).abs() < 1e-10);
        let r = cell_problem_1d(&|y| 2.0 + (2.0 * PI * y).sin(), 64).unwrap();
        assert!((r.homogenized_coeff - 3f64.sqrt()).abs() < 1e-10);
        let mean: f64 = r.correctors[0].iter().sum::<f64>() / 64.0;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn nonpositive_coefficient_rejected() {
        assert!(matches!(cell_problem_1d(&|y| y - 0.5, 16), Err(Error::Ellipticity { .. })));
    }

    #[test]
    fn synthetic_rate() {
        let eps = [0.5, 0.25, 0.125, 0.0625];
        let err: Vec<f64> = eps.iter().map(|e| 0.3 * e).collect();
        let (fit, warn) = homogenization_error_rate(&eps, &err).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!(warn.is_none());
        let (_, warn) = homogenization_error_rate(&eps, &[1.0, 2.0, 0.5, 0.1]).unwrap();
        assert!(warn.is_some());
        assert!(homogenization_error_rate(&eps[..3], &err[..3]).is_err());
    }
}
