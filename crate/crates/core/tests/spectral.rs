use approx::assert_relative_eq;
use schrolab::fem::{MultiscaleCoefficient, TensorMesh};
use schrolab::linalg::SparseMatrix;
use schrolab::spectral::{
    dense_eigenvalues, elliptic_kappa_bound, extreme_eigs, inverse_lanczos_min, inverse_power_min, lanczos,
    singular_extremes, verify_bounds, write_report_csv, BoundCase, BoundInput, RitzTarget,
};
use std::f64::consts::PI;

fn laplacian(n: usize) -> SparseMatrix<f64> {
    SparseMatrix::tridiagonal(n, -1.0, 2.0, -1.0)
}

// eigenvalues 2 − 2cos(kπ/(n+1))
fn laplacian_extremes(n: usize) -> (f64, f64) {
    let t = PI / (n as f64 + 1.0);
    (2.0 - 2.0 * t.cos(), 2.0 - 2.0 * (n as f64 * t).cos())
}

#[test]
fn lanczos_matches_closed_form_spectrum() {
    let n = 60;
    let a = laplacian(n);
    let (lo, hi) = laplacian_extremes(n);
    let (_, lmax, _) = lanczos(n, |x, y| a.matvec_into(x, y), RitzTarget::Largest, 1e-10, 1000, 3).unwrap();
    assert_relative_eq!(lmax, hi, max_relative = 1e-8);
    assert_relative_eq!(inverse_lanczos_min(&a, 1e-10).unwrap(), lo, max_relative = 1e-8);
    assert_relative_eq!(inverse_power_min(&a, 1e-10).unwrap(), lo, max_relative = 1e-8);
    let est = extreme_eigs(&a, 1e-10).unwrap();
    assert_relative_eq!(est.lambda_min, lo, max_relative = 1e-8);
    assert_relative_eq!(est.lambda_max, hi, max_relative = 1e-8);
}

#[test]
fn dense_eigenvalues_are_sorted() {
    let e = dense_eigenvalues(&laplacian(9)).unwrap();
    assert!(e.windows(2).all(|w| w[0] <= w[1]));
    let (lo, hi) = laplacian_extremes(9);
    assert_relative_eq!(e[0], lo, epsilon = 1e-13);
    assert_relative_eq!(e[8], hi, epsilon = 1e-13);
}

#[test]
fn singular_values_of_a_bidiagonal_matrix() {
    // L = I − S has LᵀL with the same spectrum family as a shifted Laplacian
    let n = 30;
    let l = SparseMatrix::tridiagonal(n, -1.0, 2.0, 0.0);
    let dense = {
        let g = l.transpose().matmul(&l).unwrap();
        dense_eigenvalues(&g).unwrap()
    };
    let (smin, smax) = singular_extremes(&l, 1e-10).unwrap();
    assert_relative_eq!(smin, dense[0].sqrt(), max_relative = 1e-7);
    assert_relative_eq!(smax, dense[n - 1].sqrt(), max_relative = 1e-7);
}

#[test]
fn indefinite_matrices_are_reported() {
    let a = SparseMatrix::from_dense(&[vec![-1.0, 0.0], vec![0.0, 3.0]]);
    assert!(inverse_power_min(&a, 1e-10).is_err());
    assert!(extreme_eigs(&SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![0.0, 1.0]]), 1e-8).is_err());
}

#[test]
fn every_case_satisfies_its_bound_in_one_dimension() {
    let mesh = TensorMesh::new(1, 15).unwrap();
    let mut reports = Vec::new();
    for case in BoundCase::ALL {
        let coef = if case == BoundCase::Reiterated {
            MultiscaleCoefficient::preset("product_nscale", 1, vec![0.25, 1.0 / 16.0]).unwrap()
        } else {
            MultiscaleCoefficient::preset("sin1d", 1, vec![0.25]).unwrap()
        };
        let rep = verify_bounds(&BoundInput::new(case, coef, mesh.clone(), None)).unwrap();
        assert!(rep.passes(), "{}: κ = {} bound {} s = {}/{}", case.name(), rep.kappa, rep.theory_bound_kappa, rep.s, rep.s_theory);
        assert!(rep.lambda_min > 0.0 && rep.kappa >= 1.0);
        assert_eq!(BoundCase::parse(case.name()).unwrap(), case);
        reports.push(rep);
    }
    let mut buf = Vec::new();
    write_report_csv(&reports, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + reports.len());
    assert!(BoundCase::parse("nope").is_err());
}

#[test]
fn elliptic_kappa_grows_like_inverse_h_squared() {
    // constant coefficient: κ = cot²(πh/2) exactly in one dimension
    let coef = MultiscaleCoefficient::preset("constant", 1, vec![]).unwrap();
    let mut pts = Vec::new();
    for n in [15usize, 31, 63] {
        let mesh = TensorMesh::new(1, n).unwrap();
        let h = mesh.h();
        let rep = verify_bounds(&BoundInput::new(BoundCase::EllipticCanonical, coef.clone(), mesh, None)).unwrap();
        assert_relative_eq!(rep.kappa, (PI * h / 2.0).tan().powi(-2), max_relative = 1e-6);
        assert!(rep.kappa <= elliptic_kappa_bound(1, h, 1.0, 1.0));
        pts.push((h.ln(), rep.kappa.ln()));
    }
    let slope = (pts[2].1 - pts[0].1) / (pts[2].0 - pts[0].0);
    assert!((slope + 2.0).abs() < 0.05, "slope {slope}");
}
