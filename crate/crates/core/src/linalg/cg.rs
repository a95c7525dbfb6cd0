//! Unpreconditioned conjugate gradients.

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;
use serde::Serialize;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// Relative residual ‖b − Ax‖/‖b‖ of the returned iterate.
    pub residual_norm: f64,
    pub matvec_count: usize,
}

fn norm<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |s, &v| s + v * v).sqrt()
}

fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).fold(T::zero(), |s, (&a, &b)| s + a * b)
}

fn to_f64<T: Real>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.as_f64()).collect()
}

/// Solves `a x = rhs` to relative residual `tol`, starting from zero.
pub fn cg_solve<T: Real>(a: &SparseMatrix<T>, rhs: &[T], tol: T) -> Result<(Vec<T>, SolveStats)> {
    if !a.is_square() || rhs.len() != a.n_rows() {
        return Err(Error::DimensionMismatch { what: "cg_solve", left: a.n_rows(), right: rhs.len() });
    }
    cg_solve_with(a.n_rows(), |x, y| a.matvec_into(x, y), rhs, tol, 10 * a.n_rows())
}

/// Matrix-free variant: `op(x, y)` must write `A x` into `y`.
pub fn cg_solve_with<T: Real, F>(
    n: usize,
    op: F,
    rhs: &[T],
    tol: T,
    max_iter: usize,
) -> Result<(Vec<T>, SolveStats)>
where
    F: Fn(&[T], &mut [T]),
{
    if !(tol > T::zero()) {
        return Err(Error::invalid("cg tolerance must be positive"));
    }
    let bnorm = norm(rhs);
    let mut x = vec![T::zero(); n];
    if bnorm == T::zero() {
        return Ok((x, SolveStats::default()));
    }
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![T::zero(); n];
    let mut rr = dot(&r, &r);
    let mut stats = SolveStats { iterations: 0, residual_norm: 1.0, matvec_count: 0 };
    let mut best = (T::one(), x.clone());
    for it in 0..max_iter {
        op(&p, &mut ap);
        stats.matvec_count += 1;
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(Error::NegativeCurvature { iteration: it, curvature: pap.as_f64(), direction: to_f64(&p) });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] = x[i] + alpha * p[i];
            r[i] = r[i] - alpha * ap[i];
        }
        stats.iterations = it + 1;
        let rr_new = dot(&r, &r);
        let rel = rr_new.sqrt() / bnorm;
        if rel < best.0 {
            best = (rel, x.clone());
        }
        if rel <= tol {
            // confirm on the true residual; recurrence drift can mislead
            op(&x, &mut ap);
            stats.matvec_count += 1;
            let true_rel = residual(rhs, &ap) / bnorm;
            if true_rel <= tol {
                stats.residual_norm = true_rel.as_f64();
                return Ok((x, stats));
            }
            for i in 0..n {
                r[i] = rhs[i] - ap[i];
            }
            let rr_true = dot(&r, &r);
            p.clone_from(&r);
            rr = rr_true;
            continue;
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(Error::CgNotConverged { iterations: stats.iterations, residual: best.0.as_f64(), best_iterate: to_f64(&best.1) })
}

fn residual<T: Real>(b: &[T], ax: &[T]) -> T {
    b.iter().zip(ax).fold(T::zero(), |s, (&p, &q)| s + (p - q) * (p - q)).sqrt()
}
