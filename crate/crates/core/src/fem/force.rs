//! Load vectors and P1 function evaluation.

use super::mesh::TensorMesh;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Three-point Gauss–Legendre rule on [0,1].
pub(crate) const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Visits every cell of the mesh with the tensor Gauss points of that cell:
/// `visit(cell, local_t, x, weight)`.
pub(crate) fn for_each_gauss_point(mesh: &TensorMesh, mut visit: impl FnMut(&[usize], &[f64], &[f64], f64)) {
    let d = mesh.d();
    let cells = mesh.cells();
    let h = mesh.h();
    let n_cells = cells.pow(d as u32);
    let n_pts = 3usize.pow(d as u32);
    let mut c = vec![0usize; d];
    let mut t = vec![0.0; d];
    let mut x = vec![0.0; d];
    for flat in 0..n_cells {
        let mut r = flat;
        for k in (0..d).rev() {
            c[k] = r % cells;
            r /= cells;
        }
        for p in 0..n_pts {
            let mut r = p;
            let mut w = h.powi(d as i32);
            for k in (0..d).rev() {
                let (tk, wk) = GAUSS3[r % 3];
                r /= 3;
                t[k] = tk;
                x[k] = (c[k] as f64 + tk) * h;
                w *= wk;
            }
            visit(&c, &t, &x, w);
        }
    }
}

/// Interior-node neighbours of a cell: (flat dof index, multilinear weight
/// at local point t).
pub(crate) fn cell_basis(mesh: &TensorMesh, cell: &[usize], t: &[f64], out: &mut Vec<(usize, f64)>) {
    out.clear();
    let d = mesh.d();
    let n = mesh.n();
    'corner: for pattern in 0..(1usize << d) {
        let mut idx = 0usize;
        let mut w = 1.0;
        for k in 0..d {
            let bit = (pattern >> (d - 1 - k)) & 1;
            let node = cell[k] + bit;
            if node == 0 || node == n + 1 {
                continue 'corner;
            }
            idx = idx * n + (node - 1);
            w *= if bit == 0 { 1.0 - t[k] } else { t[k] };
        }
        out.push((idx, w));
    }
}

/// F_i = ∫ f φ_i by three-point Gauss quadrature on every cell.
pub fn assemble_force<T: Real>(f: &(dyn Fn(&[f64]) -> f64 + Sync), mesh: &TensorMesh) -> Result<Vec<T>> {
    let mut out = vec![0.0f64; mesh.dof()?];
    let mut basis = Vec::new();
    for_each_gauss_point(mesh, |c, t, x, w| {
        let fx = f(x);
        if fx != 0.0 {
            cell_basis(mesh, c, t, &mut basis);
            for &(i, phi) in &basis {
                out[i] += w * fx * phi;
            }
        }
    });
    Ok(out.into_iter().map(T::c).collect())
}

/// Nodal interpolant of `g` at the interior nodes.
pub fn interpolate<T: Real>(g: &dyn Fn(&[f64]) -> f64, mesh: &TensorMesh) -> Result<Vec<T>> {
    Ok((0..mesh.dof()?).map(|i| T::c(g(&mesh.node_coords(i)))).collect())
}

/// Value of the P1 function with interior nodal values `u` at `x`.
pub fn evaluate_p1<T: Real>(mesh: &TensorMesh, u: &[T], x: &[f64]) -> Result<f64> {
    let d = mesh.d();
    if x.len() != d || x.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::invalid(format!("point {x:?} lies outside the unit cube")));
    }
    let cells = mesh.cells();
    let mut c = vec![0usize; d];
    let mut t = vec![0.0; d];
    for k in 0..d {
        let s = x[k] * cells as f64;
        c[k] = (s.floor() as usize).min(cells - 1);
        t[k] = s - c[k] as f64;
    }
    let mut basis = Vec::new();
    cell_basis(mesh, &c, &t, &mut basis);
    Ok(basis.iter().map(|&(i, w)| w * u[i].as_f64()).sum())
}

/// ‖u_h − g‖_{L²} and the broken H¹ seminorm of the error, by Gauss
/// quadrature; `grad` supplies ∇g.
pub fn l2_h1_error<T: Real>(
    mesh: &TensorMesh,
    u: &[T],
    g: &dyn Fn(&[f64]) -> f64,
    grad: Option<&dyn Fn(&[f64]) -> Vec<f64>>,
) -> (f64, f64) {
    let d = mesh.d();
    let n = mesh.n();
    let h = mesh.h();
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    let mut basis = Vec::new();
    for_each_gauss_point(mesh, |c, t, x, w| {
        cell_basis(mesh, c, t, &mut basis);
        let uh: f64 = basis.iter().map(|&(i, b)| b * u[i].as_f64()).sum();
        l2 += w * (uh - g(x)).powi(2);
        if let Some(grad) = grad {
            let gx = grad(x);
            for k in 0..d {
                let mut du = 0.0;
                'corner: for pattern in 0..(1usize << d) {
                    let mut idx = 0usize;
                    let mut wgt = 1.0;
                    for j in 0..d {
                        let bit = (pattern >> (d - 1 - j)) & 1;
                        let node = c[j] + bit;
                        if node == 0 || node == n + 1 {
                            continue 'corner;
                        }
                        idx = idx * n + node - 1;
                        wgt *= if j == k {
                            if bit == 0 { -1.0 / h } else { 1.0 / h }
                        } else if bit == 0 {
                            1.0 - t[j]
                        } else {
                            t[j]
                        };
                    }
                    du += wgt * u[idx].as_f64();
                }
                h1 += w * (du - gx[k]).powi(2);
            }
        }
    });
    (l2.sqrt(), h1.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_load() {
        let mesh = TensorMesh::new(1, 5).unwrap();
        let f: Vec<f64> = assemble_force(&|_| 1.0, &mesh).unwrap();
        assert!(f.iter().all(|v| (v - mesh.h()).abs() < 1e-15));
        let z: Vec<f64> = assemble_force(&|_| 0.0, &mesh).unwrap();
        assert!(z.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_load_exact() {
        let mesh = TensorMesh::new(1, 3).unwrap();
        let f: Vec<f64> = assemble_force(&|x| x[0], &mesh).unwrap();
        // ∫ x φ_i = x_i h for interior hats on a uniform mesh
        for (i, v) in f.iter().enumerate() {
            assert!((v - (i + 1) as f64 / 16.0).abs() < 1e-15);
        }
    }

    #[test]
    fn interpolant_evaluates_exactly_at_nodes() {
        let mesh = TensorMesh::new(2, 3).unwrap();
        let u: Vec<f64> = interpolate(&|x| x[0] * (1.0 - x[0]) * x[1], &mesh).unwrap();
        let v = evaluate_p1(&mesh, &u, &[0.5, 0.25]).unwrap();
        assert!((v - 0.25 * 0.25).abs() < 1e-15);
        assert!(evaluate_p1(&mesh, &u, &[1.5, 0.0]).is_err());
    }
}
