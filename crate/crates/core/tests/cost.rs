use approx::assert_relative_eq;
use schrolab::cost::{
    classical_cost, evaluate_cost, fit_exponent, parabolic_error_rate, quantum_cost, select_parameters,
    symbolic_table1, table1_growth, write_cost_csv, CostKind, Equation, ExperimentConfig, Model, DEFAULT_DOF_BUDGET,
};
use schrolab::Error;

#[test]
fn parameter_rules() {
    // canonical elliptic: h = √(δ ε₁ⁿ) = 1/16 for ε₁ = δ = 1/16, n = 1
    let c = ExperimentConfig::new(Equation::Elliptic, Model::Canonical, 1, 1, 1.0 / 16.0);
    let p = select_parameters(&c, DEFAULT_DOF_BUDGET).unwrap();
    assert_eq!((p.h, p.n_nodes, p.n_steps, p.dof), (1.0 / 16.0, 15, 1, 15));
    assert!(p.dt.is_none());
    assert_relative_eq!(p.p_max, 2.0 + 16f64.ln());
    // homogenized: h = √δ, lifted unknowns N + (N+2)N
    let c = ExperimentConfig::new(Equation::Elliptic, Model::Homogenized, 1, 1, 1.0 / 16.0);
    let p = select_parameters(&c, DEFAULT_DOF_BUDGET).unwrap();
    assert_eq!((p.h, p.n_nodes, p.dof), (0.25, 3, 18));
    // wave canonical: h = √(δε₁), Δt = δ, N_T = T/δ blocks of 2N
    let c = ExperimentConfig::new(Equation::Wave, Model::Canonical, 1, 1, 1.0 / 16.0);
    let p = select_parameters(&c, DEFAULT_DOF_BUDGET).unwrap();
    assert_eq!(p.dt, Some(1.0 / 16.0));
    assert_eq!(p.n_steps, 16);
    assert_eq!((p.n_nodes, p.dof), (15, 16 * 2 * 15));
}

#[test]
fn dof_budget_and_validation() {
    let c = ExperimentConfig::new(Equation::Elliptic, Model::Canonical, 3, 1, 1.0 / 64.0);
    assert!(matches!(select_parameters(&c, 1000), Err(Error::DofBudget { .. })));
    let bad = [
        ExperimentConfig { d: 4, ..ExperimentConfig::new(Equation::Elliptic, Model::Canonical, 1, 1, 0.1) },
        ExperimentConfig::new(Equation::Elliptic, Model::Canonical, 1, 0, 0.1),
        ExperimentConfig::new(Equation::Wave, Model::Canonical, 1, 2, 0.1),
        ExperimentConfig::new(Equation::Elliptic, Model::Canonical, 1, 1, 1.5),
        ExperimentConfig { delta: 0.5, ..ExperimentConfig::new(Equation::Elliptic, Model::Canonical, 1, 1, 0.1) },
        ExperimentConfig { t_final: 0.0, ..ExperimentConfig::new(Equation::Parabolic, Model::Canonical, 1, 1, 0.1) },
    ];
    for c in &bad {
        assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
    }
    assert!(Equation::parse("heat").is_err());
    assert_eq!(Model::parse("homogenized").unwrap(), Model::Homogenized);
    assert_eq!(CostKind::parse("quantum").unwrap(), CostKind::Quantum);
}

#[test]
fn cost_formulas() {
    assert_relative_eq!(classical_cost(100.0, 3.0, 16.0, (-2f64).exp()), 100.0 * 3.0 * 4.0 * 2.0, max_relative = 1e-14);
    let (q, g) = quantum_cost(10.0, 5, 10.0 * (-(1f64.exp())).exp()).unwrap();
    // L = e, ln L = 1
    let l = 1f64.exp();
    assert_relative_eq!(q, 10.0 * l, max_relative = 1e-12);
    assert_relative_eq!(g, 10.0 * (5.0 + l.powf(2.5)) * l, max_relative = 1e-12);
    assert!(quantum_cost(0.0, 1, 0.1).is_err());
    assert!(quantum_cost(0.05, 1, 0.1).is_err());
}

#[test]
fn parabolic_rate_regimes() {
    let e: f64 = 0.01;
    assert_relative_eq!(parabolic_error_rate(e, 1.5).unwrap(), e.powf(2.0 - 2.0 / 1.5));
    assert_relative_eq!(parabolic_error_rate(e, 2.0).unwrap(), e * (e.ln().abs() + 1.0).sqrt());
    assert_relative_eq!(parabolic_error_rate(e, 4.0).unwrap(), e);
    assert!(parabolic_error_rate(e, 1.0).is_err());
    assert!(parabolic_error_rate(1.0, 2.0).is_err());
}

#[test]
fn symbolic_rows_cover_every_cell() {
    let rows = symbolic_table1(&[1, 2], &[1, 2]);
    // elliptic: 2 models × 2 kinds × 2 d × 2 n; evolution: 2 equations × 2 × 2 × 2 d
    assert_eq!(rows.len(), 16 + 16);
    for r in &rows {
        assert_eq!(r.table, table1_growth(r.equation, r.model, r.kind, r.d, r.n));
        let explained = r.equation == Equation::Wave && r.model == Model::Homogenized;
        assert!(r.matches() || (explained && r.derived_dt_like_h == r.table), "{:?}", r);
    }
    assert_eq!(
        table1_growth(Equation::Elliptic, Model::Canonical, CostKind::Classical, 2, 1).to_string(),
        "3^(3) eps1^(-3)"
    );
}

#[test]
fn fitted_exponent_of_a_power_law() {
    let eps = [0.5, 0.25, 0.125, 0.0625];
    let cost: Vec<f64> = eps.iter().map(|e: &f64| 7.0 * e.powf(-2.5)).collect();
    assert_relative_eq!(fit_exponent(&eps, &cost).unwrap(), 2.5, epsilon = 1e-12);
}

#[test]
fn measured_costs_stay_below_theory() {
    let mut reports = Vec::new();
    for eq in Equation::ALL {
        for model in Model::ALL {
            let rep = evaluate_cost(&ExperimentConfig::new(eq, model, 1, 1, 0.25), DEFAULT_DOF_BUDGET).unwrap();
            assert!(rep.kappa >= 1.0 && rep.kappa <= rep.kappa_theory * (1.0 + 1e-6), "{eq:?} {model:?}");
            assert!(rep.classical_cost > 0.0 && rep.tau > 0.0);
            reports.push(rep);
        }
    }
    let mut buf = Vec::new();
    write_cost_csv(&reports, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 7);
}
