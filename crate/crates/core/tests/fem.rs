use approx::assert_relative_eq;
use schrolab::fem::{
    assemble_canonical, assemble_force, assemble_two_scale, evaluate_p1, interpolate, l2_h1_error, lifted_dof,
    mass_1d, mass_d, stiffness_1d, stiffness_d, AssemblyOptions, MultiscaleCoefficient, TensorMesh,
};
use schrolab::linalg::{kron_all, SparseMatrix};
use schrolab::{Error, Rational};

#[test]
fn exact_one_dimensional_entries() {
    for n in [1usize, 3, 7, 31] {
        let mesh = TensorMesh::new(1, n).unwrap();
        let h = Rational::new(1, n as i64 + 1);
        let m = mass_1d::<Rational>(&mesh);
        let k = stiffness_1d::<Rational>(&mesh);
        for i in 0..n {
            assert_eq!(m.get(i, i), h * Rational::new(2, 3));
            assert_eq!(k.get(i, i), Rational::new(2, 1) / h);
            if i + 1 < n {
                assert_eq!(m.get(i, i + 1), h / Rational::new(6, 1));
                assert_eq!(k.get(i + 1, i), -Rational::new(1, 1) / h);
            }
        }
    }
}

#[test]
fn tensor_matrices_are_kronecker_forms() {
    let mesh1 = TensorMesh::new(1, 3).unwrap();
    let mesh2 = TensorMesh::new(2, 3).unwrap();
    let m1 = mass_1d::<Rational>(&mesh1);
    let k1 = stiffness_1d::<Rational>(&mesh1);
    assert_eq!(mass_d::<Rational>(&mesh2).unwrap(), kron_all(&[&m1, &m1]).unwrap());
    let ks = kron_all(&[&k1, &m1]).unwrap().add(&kron_all(&[&m1, &k1]).unwrap()).unwrap();
    assert_eq!(stiffness_d::<Rational>(&mesh2).unwrap(), ks);
}

#[test]
fn constant_coefficient_assembly_is_the_stiffness_matrix() {
    let mesh = TensorMesh::new(2, 5).unwrap();
    let coef = MultiscaleCoefficient::preset("constant", 2, vec![]).unwrap();
    let a = assemble_canonical::<f64>(&coef, &mesh, &AssemblyOptions::default()).unwrap();
    let k: SparseMatrix<f64> = stiffness_d(&mesh).unwrap();
    for (i, j, v) in k.triplets() {
        assert_relative_eq!(a.get(i, j), v, epsilon = 1e-12);
    }
    assert_eq!(a.nnz(), k.nnz());
}

#[test]
fn single_precision_assembly_tracks_double() {
    let mesh = TensorMesh::new(1, 7).unwrap();
    let coef = MultiscaleCoefficient::preset("sin1d", 1, vec![0.25]).unwrap();
    let a64 = assemble_canonical::<f64>(&coef, &mesh, &AssemblyOptions::default()).unwrap();
    let a32 = assemble_canonical::<f32>(&coef, &mesh, &AssemblyOptions::default()).unwrap();
    for (i, j, v) in a64.triplets() {
        assert_relative_eq!(a32.get(i, j) as f64, v, max_relative = 1e-6);
    }
}

#[test]
fn load_vector_integrates_constants() {
    // Σ_i ∫ φ_i equals ∫ of the interior hat sum, 1 − h per direction
    for d in 1..=3 {
        let mesh = TensorMesh::new(d, 7).unwrap();
        let f = assemble_force::<f64>(&|_| 1.0, &mesh).unwrap();
        let total: f64 = f.iter().sum();
        assert_relative_eq!(total, (1.0 - mesh.h()).powi(d as i32), epsilon = 1e-12);
    }
}

#[test]
fn p1_interpolant_reproduces_bilinear_data() {
    let mesh = TensorMesh::new(2, 7).unwrap();
    let g = |x: &[f64]| x[0] * (1.0 - x[0]) * x[1];
    let u: Vec<f64> = interpolate(&|x| g(x), &mesh).unwrap();
    let x = [3.0 / 8.0, 5.0 / 8.0];
    assert_relative_eq!(evaluate_p1(&mesh, &u, &x).unwrap(), g(&x), epsilon = 1e-14);
    assert!(evaluate_p1(&mesh, &u, &[1.5, 0.0]).is_err());
}

#[test]
fn elliptic_error_decreases_at_second_order() {
    use std::f64::consts::PI;
    let coef = MultiscaleCoefficient::preset("constant", 2, vec![]).unwrap();
    let g = |x: &[f64]| (PI * x[0]).sin() * (PI * x[1]).sin();
    let f = move |x: &[f64]| 2.0 * PI * PI * g(x);
    let mut errs = Vec::new();
    for n in [7usize, 15] {
        let mesh = TensorMesh::new(2, n).unwrap();
        let a = assemble_canonical::<f64>(&coef, &mesh, &AssemblyOptions::default()).unwrap();
        let rhs = assemble_force::<f64>(&f, &mesh).unwrap();
        let u = schrolab::linalg::factorize(&a).unwrap().solve(&rhs);
        errs.push(l2_h1_error(&mesh, &u, &g, None).0);
    }
    let rate = (errs[0] / errs[1]).log2();
    assert!((rate - 2.0).abs() < 0.15, "rate {rate}");
}

#[test]
fn two_scale_sparsity_with_x_dependent_coefficient() {
    let coef = MultiscaleCoefficient::custom("xy", 1, vec![0.25], 1.0, 4.5, |x, y| {
        (1.0 + x[0] / 2.0) * (2.0 + (2.0 * std::f64::consts::PI * y[0]).sin())
    })
    .unwrap();
    let mesh = TensorMesh::new(1, 5).unwrap();
    let sys = assemble_two_scale::<f64>(&coef, &mesh, &|_| 1.0, &AssemblyOptions::default()).unwrap();
    assert_eq!(sys.matrix.sparsity_over(sys.interior_rows()), 12);
    assert_eq!(sys.matrix.n_rows() as u128, lifted_dof(&mesh, 1));
    assert!(sys.matrix.check_symmetric());
    assert_eq!(sys.range(0).len(), 5);
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(TensorMesh::new(0, 3).is_err());
    assert!(TensorMesh::new(1, 0).is_err());
    assert!(matches!(
        MultiscaleCoefficient::custom("bad", 1, vec![], 2.0, 1.0, |_, _| 1.0),
        Err(Error::Ellipticity { .. })
    ));
    assert!(MultiscaleCoefficient::custom("bad", 1, vec![0.5, 0.5], 1.0, 1.0, |_, _| 1.0).is_err());
    assert!(MultiscaleCoefficient::preset("nope", 1, vec![0.5]).is_err());
    let coef = MultiscaleCoefficient::preset("sin1d", 2, vec![0.25]).unwrap();
    let mesh = TensorMesh::new(1, 3).unwrap();
    assert!(assemble_canonical::<f64>(&coef, &mesh, &AssemblyOptions::default()).is_err());
}

#[test]
fn quadrature_budget_is_enforced() {
    let coef = MultiscaleCoefficient::preset("sin1d", 2, vec![1e-3]).unwrap();
    let mesh = TensorMesh::new(2, 3).unwrap();
    let opts = AssemblyOptions { quad_budget: 100, ..AssemblyOptions::default() };
    assert!(matches!(assemble_canonical::<f64>(&coef, &mesh, &opts), Err(Error::QuadratureBudget { .. })));
}

#[test]
fn cross_blocks_are_insensitive_to_quadrature_refinement() {
    let coef = MultiscaleCoefficient::custom("xy", 1, vec![0.25], 1.0, 4.5, |x, y| {
        (1.0 + x[0] / 2.0) * (2.0 + (2.0 * std::f64::consts::PI * y[0]).sin())
    })
    .unwrap();
    let mesh = TensorMesh::new(1, 7).unwrap();
    let assemble = |sub: Option<usize>| {
        let opts = AssemblyOptions { sub_override: sub, ..AssemblyOptions::default() };
        assemble_two_scale::<f64>(&coef, &mesh, &|_| 1.0, &opts).unwrap().matrix
    };
    let base = assemble(None);
    let fine = assemble(Some(64));
    let finer = assemble(Some(128));
    let scale = finer.max_entry();
    let gap = |a: &SparseMatrix<f64>| a.max_abs_diff(&finer) / scale;
    assert!(gap(&base) < 1e-2, "default rule gap {}", gap(&base));
    // midpoint sub-cells converge at second order
    assert!(gap(&fine) < gap(&base) && gap(&fine) < 1e-3, "refined gap {}", gap(&fine));
}
