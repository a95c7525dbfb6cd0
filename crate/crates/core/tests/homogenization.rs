use approx::assert_relative_eq;
use schrolab::fem::MultiscaleCoefficient;
use schrolab::homogenization::{
    cell_problem_1d, cell_problem_fem, harmonic_mean, homogenization_error_rate, homogenized_1d,
};
use std::f64::consts::PI;

#[test]
fn harmonic_means_in_closed_form() {
    // ∫₀¹ dy/(2 + sin 2πy) = 1/√3
    assert_relative_eq!(harmonic_mean(&|y| 2.0 + (2.0 * PI * y).sin()), 3f64.sqrt(), epsilon = 1e-12);
    // piecewise constant 1 and 10 on halves: 2/(1 + 1/10)
    let pw = |y: f64| if y < 0.5 { 1.0 } else { 10.0 };
    assert_relative_eq!(harmonic_mean(&pw), 20.0 / 11.0, epsilon = 1e-9);
    assert_relative_eq!(harmonic_mean(&|_| 4.0), 4.0, epsilon = 1e-14);
}

#[test]
fn cell_problems_agree_in_one_dimension() {
    let a = |y: f64| 2.0 + (2.0 * PI * y).sin();
    let closed = cell_problem_1d(&a, 256).unwrap();
    let fem = cell_problem_fem(&|y: &[f64]| a(y[0]), 1, 256).unwrap();
    assert_relative_eq!(closed.homogenized_tensor[0][0], 3f64.sqrt(), epsilon = 1e-10);
    assert_relative_eq!(fem.homogenized_tensor[0][0], closed.homogenized_tensor[0][0], max_relative = 1e-3);
}

#[test]
fn laminate_in_two_dimensions() {
    // a depends on y₁ only: A₀ = diag(harmonic, arithmetic)
    let a = |y: &[f64]| 2.0 + (2.0 * PI * y[0]).sin();
    let res = cell_problem_fem(&a, 2, 32).unwrap();
    assert_relative_eq!(res.homogenized_tensor[0][0], 3f64.sqrt(), max_relative = 5e-3);
    assert_relative_eq!(res.homogenized_tensor[1][1], 2.0, max_relative = 5e-3);
    assert!(res.homogenized_tensor[0][1].abs() < 1e-8);
}

#[test]
fn tabulated_coefficient_of_sin1d() {
    let coef = MultiscaleCoefficient::preset("sin1d", 1, vec![0.1]).unwrap();
    let hom = homogenized_1d(&coef).unwrap();
    for x in [0.0, 0.37, 1.0] {
        assert_relative_eq!(hom.evaluate(&[x], &[]), 3f64.sqrt(), epsilon = 1e-10);
    }
    let two = MultiscaleCoefficient::preset("sin1d", 2, vec![0.1]).unwrap();
    assert!(homogenized_1d(&two).is_err());
}

#[test]
fn rate_fit_needs_four_points_and_flags_non_monotone_data() {
    assert!(homogenization_error_rate(&[0.5, 0.25, 0.125], &[1.0, 0.5, 0.25]).is_err());
    let eps = [0.5, 0.25, 0.125, 0.0625];
    let (fit, warn) = homogenization_error_rate(&eps, &[0.4, 0.2, 0.1, 0.05]).unwrap();
    assert_relative_eq!(fit.slope, 1.0, epsilon = 1e-12);
    assert!(warn.is_none());
    let (_, warn) = homogenization_error_rate(&eps, &[0.4, 0.2, 0.3, 0.05]).unwrap();
    assert!(warn.is_some());
}

#[test]
fn elliptic_rate_sweep_is_first_order_and_writes_csv() {
    use schrolab::homogenization::{rate_sweep, write_rate_csv, RateProblem, RateSweep};
    let coef = MultiscaleCoefficient::preset("sin1d", 1, vec![0.125]).unwrap();
    let rep = rate_sweep(&coef, &RateSweep::new(RateProblem::Elliptic, vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]))
        .unwrap();
    assert!((rep.fit.slope - 1.0).abs() < 0.2, "slope {}", rep.fit.slope);
    let mut buf = Vec::new();
    write_rate_csv(&rep.points, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("epsilon,h_ref,h_hom,err_L2,err_H1,slope_running"));
    assert_eq!(text.lines().count(), 5);
}
