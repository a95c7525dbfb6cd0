use approx::assert_relative_eq;
use schrolab::fem::{assemble_two_scale, mass_d, stiffness_d, AssemblyOptions, MultiscaleCoefficient, TensorMesh};
use schrolab::linalg::SparseMatrix;
use schrolab::time::{wave_energy, write_trajectory_csv, BlockTimeSystem, TimeLayout, TrajectoryLayout};

fn scalar(v: f64) -> SparseMatrix<f64> {
    SparseMatrix::from_dense(&[vec![v]])
}

#[test]
fn implicit_euler_on_a_scalar_ode() {
    // u' = −2u + 1: uʲ = (uʲ⁻¹ + Δt)/(1 + 2Δt)
    let dt = 0.1;
    let sys = BlockTimeSystem::parabolic_canonical(&scalar(1.0), &scalar(2.0), dt, 5, &|_| vec![1.0], &[3.0]).unwrap();
    let states = sys.march_reference().unwrap();
    let mut u = 3.0;
    for s in &states[1..] {
        u = (u + dt) / (1.0 + 2.0 * dt);
        assert_relative_eq!(s[0], u, epsilon = 1e-14);
    }
    assert_eq!(sys.layout, TimeLayout::ParabolicCanonical);
    assert_relative_eq!(sys.final_time(), 0.5, epsilon = 1e-15);
}

#[test]
fn midpoint_harmonic_oscillator_is_a_cayley_rotation() {
    // u'' = −ω²u: the midpoint rule rotates (ωu, v) by 2·atan(ωΔt/2)
    let (w, dt) = (3.0, 0.2);
    let sys =
        BlockTimeSystem::wave_canonical(&scalar(1.0), &scalar(w * w), dt, 10, &|_| vec![0.0], &[1.0], &[0.0]).unwrap();
    let states = sys.march_reference().unwrap();
    let theta = 2.0 * (w * dt / 2.0).atan();
    let vr = sys.v_range.clone().unwrap();
    for (j, s) in states.iter().enumerate() {
        assert_relative_eq!(s[sys.u_range.clone()][0], (j as f64 * theta).cos(), epsilon = 1e-12);
        assert_relative_eq!(s[vr.clone()][0], -w * (j as f64 * theta).sin(), epsilon = 1e-12);
    }
}

#[test]
fn global_solve_equals_marching_on_every_layout() {
    let mesh = TensorMesh::new(1, 5).unwrap();
    let coef = MultiscaleCoefficient::preset("sin1d", 1, vec![0.25]).unwrap();
    let m: SparseMatrix<f64> = mass_d(&mesh).unwrap();
    let a: SparseMatrix<f64> = stiffness_d(&mesh).unwrap();
    let lifted = assemble_two_scale::<f64>(&coef, &mesh, &|_| 1.0, &AssemblyOptions::default()).unwrap().matrix;
    let f = |t: f64| vec![t.sin(); 5];
    let u0 = vec![0.1, 0.2, 0.3, 0.2, 0.1];
    let v0 = vec![1.0; 5];
    let systems = [
        BlockTimeSystem::parabolic_canonical(&m, &a, 0.1, 4, &f, &u0).unwrap(),
        BlockTimeSystem::parabolic_homogenized(&m, &lifted, 0.1, 4, &f, &u0).unwrap(),
        BlockTimeSystem::wave_canonical(&m, &a, 0.1, 4, &f, &u0, &v0).unwrap(),
        BlockTimeSystem::wave_homogenized(&m, &lifted, 0.1, 4, &f, &u0, &v0).unwrap(),
    ];
    for (sys, layout) in systems.iter().zip(TimeLayout::ALL) {
        assert_eq!(sys.layout, layout);
        assert_eq!(sys.layout.is_wave(), sys.v_range.is_some());
        let g = sys.solve_global().unwrap();
        let r = sys.march_reference().unwrap();
        assert_eq!(g.len(), 5);
        for (p, q) in g.iter().zip(&r) {
            for (x, y) in p.iter().zip(q) {
                assert!((x - y).abs() <= 1e-11 * (1.0 + y.abs()), "{}: {x} vs {y}", layout.name());
            }
        }
        assert_eq!(sys.u_of(&r[0]), &u0[..]);
    }
}

#[test]
fn unforced_midpoint_conserves_energy() {
    let mesh = TensorMesh::new(2, 5).unwrap();
    let m: SparseMatrix<f64> = mass_d(&mesh).unwrap();
    let a: SparseMatrix<f64> = stiffness_d(&mesh).unwrap();
    let n = m.n_rows();
    let u0: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
    let sys = BlockTimeSystem::wave_canonical(&m, &a, 0.05, 40, &|_| vec![0.0; n], &u0, &vec![0.0; n]).unwrap();
    let vr = sys.v_range.clone().unwrap();
    let energies: Vec<f64> =
        sys.march_reference().unwrap().iter().map(|s| wave_energy(&m, &a, sys.u_of(s), &s[vr.clone()])).collect();
    for e in &energies {
        assert_relative_eq!(*e, energies[0], max_relative = 1e-12);
    }
}

#[test]
fn bad_inputs_are_rejected() {
    let one = scalar(1.0);
    assert!(BlockTimeSystem::parabolic_canonical(&one, &one, 0.0, 3, &|_| vec![0.0], &[0.0]).is_err());
    assert!(BlockTimeSystem::parabolic_canonical(&one, &one, 0.1, 0, &|_| vec![0.0], &[0.0]).is_err());
    assert!(BlockTimeSystem::parabolic_canonical(&one, &one, 0.1, 2, &|_| vec![0.0, 1.0], &[0.0]).is_err());
    assert!(BlockTimeSystem::parabolic_homogenized(&one, &one, 0.1, 2, &|_| vec![0.0], &[0.0]).is_err());
}

#[test]
fn trajectory_dump_layouts() {
    let sys = BlockTimeSystem::parabolic_canonical(&scalar(1.0), &scalar(2.0), 0.5, 2, &|_| vec![1.0], &[3.0]).unwrap();
    let states = sys.march_reference().unwrap();
    let mut long = Vec::new();
    write_trajectory_csv(&states, sys.dt, TrajectoryLayout::Long, &mut long).unwrap();
    let long = String::from_utf8(long).unwrap();
    let lines: Vec<&str> = long.lines().collect();
    assert_eq!(lines[0], "step,time,dof,value");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("1,5.0000000000e-1,0,"));
    let mut wide = Vec::new();
    write_trajectory_csv(&states, sys.dt, TrajectoryLayout::Wide, &mut wide).unwrap();
    let wide = String::from_utf8(wide).unwrap();
    assert_eq!(wide.lines().next(), Some("step,time,u0"));
    assert_eq!(wide.lines().count(), 4);
    let ragged = vec![vec![1.0], vec![1.0, 2.0]];
    assert!(write_trajectory_csv(&ragged, 0.1, TrajectoryLayout::Wide, Vec::new()).is_err());
}
