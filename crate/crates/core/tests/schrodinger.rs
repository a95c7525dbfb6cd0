use approx::assert_relative_eq;
use nalgebra::DMatrix;
use num_complex::Complex64;
use schrolab::linalg::{ComplexVector, SparseMatrix};
use schrolab::schrodinger::{
    evolve, extend_system, hermitian_split, momentum_matrix, normalized_l2, recover_u, relaxation_solve,
    relaxation_trajectory, required_p_max, schrodinger_solve, unitary_evolve, Integrator, MomentumGrid,
    PipelineOptions, RelaxationMethod, SchrodingerizedSystem,
};
use schrolab::Error;

fn sample() -> SparseMatrix<f64> {
    SparseMatrix::from_dense(&[vec![3.0, -1.0, 0.0], vec![-1.0, 2.0, -0.5], vec![0.0, -0.5, 1.5]])
}

#[test]
fn extension_layout_and_split_reconstruction() {
    let a = sample();
    let f = [1.0, -2.0, 0.5];
    let ext = extend_system(&a, &f, &[0.0; 3]).unwrap();
    assert_eq!(ext.dim(), 4);
    assert_eq!(ext.u0_ext, vec![0.0, 0.0, 0.0, 1.0]);
    for i in 0..3 {
        assert_eq!(ext.a_ext.get(i, 3), -f[i]);
        assert_eq!(ext.a_ext.get(3, i), 0.0);
    }
    let split = hermitian_split(&ext).unwrap();
    assert!(split.h1.check_symmetric());
    assert_eq!(split.h2_im.max_abs_diff(&split.h2_im.transpose().scale(-1.0)), 0.0);
    let (re, im) = split.reconstruct().unwrap();
    assert_eq!(re.max_abs_diff(&ext.a_ext), 0.0);
    assert_eq!(im.max_entry(), 0.0);
    assert!(extend_system(&SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![0.0, 1.0]]), &[0.0; 2], &[0.0; 2]).is_err());
}

#[test]
fn momentum_grid_layout() {
    let mu = momentum_matrix(4, 2.0).unwrap();
    let pi = std::f64::consts::PI;
    assert_eq!(mu, vec![0.0, pi / 2.0, -pi, -pi / 2.0]);
    assert!(momentum_matrix(3, 1.0).is_err());
    assert!(momentum_matrix(4, 0.0).is_err());
    let g = MomentumGrid::new(3.0, 0.7).unwrap();
    assert_eq!(g.k % 2, 0);
    assert!(g.dp <= 0.7);
    assert_relative_eq!(g.p(g.k), 3.0, epsilon = 1e-12);
    assert_relative_eq!(g.p(g.index_at_least(1.0).unwrap()), 1.0 + (g.p(0) - 1.0).rem_euclid(g.dp), epsilon = 1e-9);
    assert!(g.index_at_least(3.5).is_err());
}

#[test]
fn h_total_is_hermitian_and_generators_match_blocks() {
    let ext = extend_system(&sample(), &[1.0, 0.0, 1.0], &[0.0; 3]).unwrap();
    let sys = SchrodingerizedSystem::new(&ext, MomentumGrid::new(2.0, 0.5).unwrap()).unwrap();
    let h = sys.h_total().unwrap();
    assert!(h.hermitian_defect() < 1e-15);
    let g = sys.generator(1);
    assert!((&g - g.adjoint()).iter().all(|z| z.norm() < 1e-15));
    for i in 0..4 {
        for j in 0..4 {
            let e = Complex64::new(h.re.get(4 + i, 4 + j), h.im.get(4 + i, 4 + j));
            assert!((e - g[(i, j)]).norm() < 1e-15);
        }
    }
    assert!(h.max_entry() <= sys.norm_estimate().unwrap());
}

#[test]
fn unitary_evolution_preserves_norm() {
    let h = DMatrix::from_row_slice(2, 2, &[
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -2.0),
        Complex64::new(0.0, 2.0),
        Complex64::new(-1.0, 0.0),
    ]);
    let w = ComplexVector::new(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]).unwrap();
    let out = unitary_evolve(&h, &w, 1.7).unwrap();
    assert_relative_eq!(out.norm(), 1.0, epsilon = 1e-13);
    let back = unitary_evolve(&h, &out, -1.7).unwrap();
    for (p, q) in back.as_slice().iter().zip(w.as_slice()) {
        assert!((p - q).norm() < 1e-13);
    }
    let bad = DMatrix::from_element(2, 2, Complex64::new(0.0, 1.0));
    assert!(unitary_evolve(&bad, &w, 1.0).is_err());
}

#[test]
fn exact_and_crank_nicolson_evolution_agree() {
    let ext = extend_system(&sample(), &[1.0, 0.0, 1.0], &[0.0; 3]).unwrap();
    let sys = SchrodingerizedSystem::new(&ext, MomentumGrid::new(6.0, 0.05).unwrap()).unwrap();
    let exact = evolve(&sys, 0.5, Integrator::Exact).unwrap();
    assert_relative_eq!(exact.norm(), sys.w0.norm(), max_relative = 1e-12);
    let gaps: Vec<f64> = [2.5e-4, 1.25e-4]
        .iter()
        .map(|&dt| {
            let cn = evolve(&sys, 0.5, Integrator::CrankNicolson { dt_sim: Some(dt) }).unwrap();
            assert_relative_eq!(cn.norm(), sys.w0.norm(), max_relative = 1e-12);
            exact.as_slice().iter().zip(cn.as_slice()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
        })
        .collect();
    // second order in the step
    let ratio = gaps[0] / gaps[1];
    assert!(gaps[0] < 1e-3 && (ratio - 4.0).abs() < 0.2, "gaps {gaps:?}");
    // recovery at p = 1 against the exact relaxation
    let k = sys.grid.index_at_least(1.0 + 3.5 * 0.5).unwrap();
    let u = recover_u(&exact, &sys.grid, k, 4).unwrap();
    let want = relaxation_trajectory(&sample(), &[1.0, 0.0, 1.0], &[0.0; 3], &[0.5]).unwrap().remove(0);
    let diff: Vec<f64> = u[..3].iter().zip(&want).map(|(p, q)| p - q).collect();
    assert!(normalized_l2(&diff) < 1e-2, "recovery error {}", normalized_l2(&diff));
}

#[test]
fn scalar_relaxation_reaches_its_steady_state() {
    // du/dt = −2u + 4 relaxes to 2
    let a = SparseMatrix::from_dense(&[vec![2.0]]);
    let rep = schrodinger_solve(&a, &[4.0], &PipelineOptions::new(1e-3)).unwrap();
    assert!((rep.u[0] - 2.0).abs() / 2.0 <= 1e-3, "u = {}", rep.u[0]);
    assert!(rep.norm_drift <= 1e-8);
    assert!(rep.cross_check_gap <= 1e-3);
    assert_relative_eq!(rep.lambda_min, 2.0, max_relative = 1e-6);
    assert!(rep.recovery_p >= 1.0);
    assert!(!rep.squared_condition);
}

#[test]
fn short_cutoff_degrades_accuracy() {
    let a = SparseMatrix::from_dense(&[vec![2.0]]);
    let auto = schrodinger_solve(&a, &[4.0], &PipelineOptions::new(1e-3)).unwrap();
    let short = schrodinger_solve(&a, &[4.0], &PipelineOptions { p_max: Some(8.0), ..PipelineOptions::new(1e-3) });
    assert!(auto.grid.p_max > 8.0);
    match short {
        Ok(r) => assert!((r.u[0] - 2.0).abs() > (auto.u[0] - 2.0).abs()),
        Err(e) => assert!(matches!(e, Error::Recovery { .. } | Error::Invalid(_)), "{e}"),
    }
}

#[test]
fn relaxation_with_nonzero_start_and_trace() {
    let a = sample();
    let f = [1.0, 0.0, 1.0];
    let u0 = [0.5, 0.5, 0.5];
    let opts = PipelineOptions { trace_samples: 4, ..PipelineOptions::new(1e-2) };
    let res = relaxation_solve(&a, &f, &u0, 1e-2, RelaxationMethod::Schrodinger(opts)).unwrap();
    let exact = relaxation_solve(&a, &f, &u0, 1e-2, RelaxationMethod::Exact).unwrap();
    let diff: Vec<f64> = res.u.iter().zip(&exact.u).map(|(p, q)| p - q).collect();
    assert!(normalized_l2(&diff) <= 1e-2 * normalized_l2(&exact.u));
    assert_relative_eq!(res.t_star, (100f64).ln() / res.lambda_min, max_relative = 1e-12);
    let rep = schrodinger_solve(&a, &f, &opts).unwrap();
    assert_eq!(rep.trace.len(), 4);
    assert!(rep.trace.windows(2).all(|w| w[0].t < w[1].t));
    assert!(rep.trace.iter().all(|p| p.error < 1e-2));
}

#[test]
fn cutoff_rule_and_errors() {
    let ln = 1e3f64.ln();
    assert_relative_eq!(required_p_max(0.0, 0.0, 1.0, 1e-3), 2.0 + ln);
    assert_relative_eq!(required_p_max(10.0, 4.0, 2.0, 1e-3), 10.0 + 0.5 * (8.0 + ln));
    let a = SparseMatrix::from_dense(&[vec![2.0]]);
    let capped = PipelineOptions { max_modes: 16, ..PipelineOptions::new(1e-3) };
    assert!(matches!(schrodinger_solve(&a, &[4.0], &capped), Err(Error::TooLarge { .. })));
    assert!(schrodinger_solve(&a, &[4.0], &PipelineOptions::new(1.5)).is_err());
    let singular = SparseMatrix::from_dense(&[vec![0.0]]);
    assert!(relaxation_solve(&singular, &[1.0], &[0.0], 1e-2, RelaxationMethod::Exact).is_err());
    let g = MomentumGrid::new(2.0, 0.5).unwrap();
    let w = ComplexVector::from_real(&vec![0.0; g.k * 2]).unwrap();
    assert!(matches!(recover_u(&w, &g, g.k - 1, 2), Err(Error::Recovery { .. })));
    assert!(recover_u(&w, &g, 0, 2).is_err());
}
