//! Experiment orchestration: flat key=value configs, presets, single runs,
//! sweeps and the cost-table reproduction, all persisted as CSV.
//!
//! Every output is a pure function of the config and seed, so repeated runs
//! and different worker counts give byte-identical files.

use crate::cost::{
    cost_sweep, evaluate_cost, fit_table1, symbolic_table1, write_cost_csv, write_table1_csv, Equation, ExperimentConfig,
    Model, DEFAULT_DOF_BUDGET,
};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_canonical, assemble_force, assemble_reiterated, evaluate_p1, l2_h1_error, mass_d, AssemblyOptions,
    TensorMesh,
};
use crate::linalg::{cg_solve_with, factorize, SparseMatrix};
use crate::schrodinger::{normalized_l2, schrodinger_solve, write_trace_csv, Integrator, PipelineOptions};
use crate::spectral::{verify_bounds, write_report_csv, BoundCase, BoundInput};
use crate::time::{write_trajectory_csv, BlockTimeSystem, TrajectoryLayout};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Largest system emulated through the Schrödinger pipeline inside a run.
pub const RUN_EMULATION_MAX_DIM: usize = 64;
/// Largest system on which CG is compared with the direct solve.
pub const CG_CHECK_MAX_DOF: usize = 5000;
/// Momentum-mode cap when the emulation is chosen automatically.
pub const RUN_EMULATION_MAX_MODES: usize = 1 << 15;
/// Iteration cap of the CG comparison, in multiples of the dimension.
const CG_CHECK_ITER_FACTOR: usize = 100;
/// Residual target of the CG comparison; tighter targets sit below the
/// rounding floor of the larger 1D meshes.
const CG_CHECK_TOL: f64 = 1e-11;
/// Largest global space-time system solved in one factorization.
pub const GLOBAL_CHECK_MAX_DOF: usize = 20_000;
/// Largest refined reference solve.
pub const REFERENCE_MAX_DOF: usize = 200_000;

const REQUIRED: [&str; 5] = ["equation", "model", "d", "eps1", "delta"];
const OPTIONAL: [&str; 9] =
    ["experiment", "n", "coefficient", "seed", "time.T", "mesh.N", "time.dt", "schrodinger", "reference.refine"];
const SWEEP_KEYS: [&str; 3] = ["sweep.eps1", "sweep.mesh.N", "sweep.time.dt"];
const TABLE1_KEYS: [&str; 5] = ["experiment", "table1.d", "table1.n", "table1.eps1", "seed"];

/// Parsed key=value pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    pub entries: BTreeMap<String, String>,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<RawConfig> {
    let mut entries = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got '{line}'", no + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", no + 1)));
        }
        if entries.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{k}'", no + 1)));
        }
    }
    Ok(RawConfig { entries })
}

/// Number with optional fraction syntax `a/b`.
pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| Error::Config(format!("bad number '{s}'")))?;
            let b: f64 = b.trim().parse().map_err(|_| Error::Config(format!("bad number '{s}'")))?;
            a / b
        }
        None => s.parse().map_err(|_| Error::Config(format!("bad number '{s}'")))?,
    };
    if !v.is_finite() {
        return Err(Error::Config(format!("number '{s}' is not finite")));
    }
    Ok(v)
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    let items: Vec<&str> = s.split(',').map(str::trim).filter(|x| !x.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::Config("empty range".into()));
    }
    items.into_iter().map(parse_number).collect()
}

fn parse_usize(key: &str, s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::Config(format!("{key} must be a non-negative integer, got '{s}'")))
}

/// Whether a run emulates its linear system through the Schrödinger
/// pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmulationMode {
    /// When the system has at most [`RUN_EMULATION_MAX_DIM`] unknowns.
    Auto,
    On,
    Off,
}

/// One fully specified run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub cfg: ExperimentConfig,
    pub seed: u64,
    pub mesh_n: Option<usize>,
    pub dt: Option<f64>,
    pub emulation: EmulationMode,
    /// Refinement factor of the reference solve; below 2 disables it.
    pub refine: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKey {
    Eps1,
    MeshN,
    TimeDt,
}

impl SweepKey {
    pub fn name(self) -> &'static str {
        match self {
            SweepKey::Eps1 => "eps1",
            SweepKey::MeshN => "mesh.N",
            SweepKey::TimeDt => "time.dt",
        }
    }

    fn apply(self, spec: &RunSpec, v: f64) -> Result<RunSpec> {
        let mut s = spec.clone();
        match self {
            SweepKey::Eps1 => s.cfg.eps1 = v,
            SweepKey::MeshN => {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(Error::Config(format!("mesh.N values must be positive integers, got {v}")));
                }
                s.mesh_n = Some(v as usize);
            }
            SweepKey::TimeDt => s.dt = Some(v),
        }
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub base: RunSpec,
    pub key: SweepKey,
    /// Sorted ascending; the listed order does not matter.
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table1Spec {
    pub d: usize,
    pub n: usize,
    pub eps: Vec<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Experiment {
    Run(RunSpec),
    Sweep(SweepSpec),
    Table1(Table1Spec),
}

fn check_keys(raw: &RawConfig, allowed: &[&str]) -> Result<()> {
    let unknown: Vec<String> = raw.entries.keys().filter(|k| !allowed.contains(&k.as_str())).cloned().collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownKeys(unknown));
    }
    Ok(())
}

fn parse_seed(raw: &RawConfig) -> Result<u64> {
    raw.entries
        .get("seed")
        .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("seed must be an integer, got '{s}'"))))
        .unwrap_or(Ok(0))
}

/// Turns raw pairs into a typed experiment, naming unknown and missing keys.
pub fn build_experiment(raw: &RawConfig) -> Result<Experiment> {
    let kind = raw.entries.get("experiment").map(String::as_str).unwrap_or("run");
    match kind {
        "table1" => {
            check_keys(raw, &TABLE1_KEYS)?;
            let get = |k: &str| raw.entries.get(k);
            let d = get("table1.d").map(|s| parse_usize("table1.d", s)).transpose()?.unwrap_or(1);
            let n = get("table1.n").map(|s| parse_usize("table1.n", s)).transpose()?.unwrap_or(1);
            let mut eps = match get("table1.eps1") {
                Some(s) => parse_list(s)?,
                None => vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            };
            eps.sort_by(|a, b| b.total_cmp(a));
            Ok(Experiment::Table1(Table1Spec { d, n, eps, seed: parse_seed(raw)? }))
        }
        "run" => {
            let mut allowed: Vec<&str> = REQUIRED.to_vec();
            allowed.extend(OPTIONAL);
            allowed.extend(SWEEP_KEYS);
            check_keys(raw, &allowed)?;
            let missing: Vec<String> =
                REQUIRED.iter().filter(|k| !raw.entries.contains_key(**k)).map(|k| k.to_string()).collect();
            if !missing.is_empty() {
                return Err(Error::MissingKeys(missing));
            }
            let e = &raw.entries;
            let equation = Equation::parse(&e["equation"])?;
            let model = Model::parse(&e["model"])?;
            let d = parse_usize("d", &e["d"])?;
            let n = e.get("n").map(|s| parse_usize("n", s)).transpose()?.unwrap_or(1);
            let eps1 = parse_number(&e["eps1"])?;
            let delta = parse_number(&e["delta"])?;
            let mut cfg = ExperimentConfig::new(equation, model, d, n, eps1);
            cfg.delta = delta;
            if let Some(t) = e.get("time.T") {
                cfg.t_final = parse_number(t)?;
            }
            cfg.coefficient = e.get("coefficient").cloned();
            let emulation = match e.get("schrodinger").map(String::as_str) {
                None | Some("auto") => EmulationMode::Auto,
                Some("on") | Some("true") => EmulationMode::On,
                Some("off") | Some("false") => EmulationMode::Off,
                Some(other) => return Err(Error::Config(format!("schrodinger must be auto, on or off, got '{other}'"))),
            };
            let spec = RunSpec {
                cfg,
                seed: parse_seed(raw)?,
                mesh_n: e.get("mesh.N").map(|s| parse_usize("mesh.N", s)).transpose()?,
                dt: e.get("time.dt").map(|s| parse_number(s)).transpose()?,
                emulation,
                refine: e.get("reference.refine").map(|s| parse_usize("reference.refine", s)).transpose()?.unwrap_or(2),
            };
            let sweeps: Vec<&str> = SWEEP_KEYS.iter().copied().filter(|k| e.contains_key(*k)).collect();
            match sweeps.as_slice() {
                [] => {
                    validate_spec(&spec)?;
                    Ok(Experiment::Run(spec))
                }
                [k] => {
                    let key = match *k {
                        "sweep.eps1" => SweepKey::Eps1,
                        "sweep.mesh.N" => SweepKey::MeshN,
                        _ => SweepKey::TimeDt,
                    };
                    let mut values = parse_list(&e[*k]).map_err(|err| Error::Config(format!("{k}: {err}")))?;
                    values.sort_by(f64::total_cmp);
                    if values.windows(2).any(|w| w[0] == w[1]) {
                        return Err(Error::Config(format!("{k} lists a value twice")));
                    }
                    for &v in &values {
                        validate_spec(&key.apply(&spec, v)?)?;
                    }
                    Ok(Experiment::Sweep(SweepSpec { base: spec, key, values }))
                }
                _ => Err(Error::Config(format!("at most one sweep key allowed, got {}", sweeps.join(", ")))),
            }
        }
        other => Err(Error::Config(format!("unknown experiment '{other}'; expected run or table1"))),
    }
}

fn validate_spec(spec: &RunSpec) -> Result<()> {
    spec.cfg.validate()?;
    if let Some(dt) = spec.dt {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("time.dt must be positive, got {dt}")));
        }
        if !spec.cfg.equation.time_dependent() {
            return Err(Error::Config("time.dt only applies to parabolic and wave runs".into()));
        }
    }
    Ok(())
}

pub fn parse_experiment(text: &str) -> Result<Experiment> {
    build_experiment(&parse_config(text)?)
}

/// Names of the built-in configurations.
pub const PRESETS: [&str; 8] = [
    "elliptic_sin1d_smoke",
    "homogenized_sin1d_smoke",
    "parabolic_smoke",
    "wave_smoke",
    "eps_sweep",
    "h_sweep",
    "dt_sweep",
    "table1_d1",
];

/// Config text of a preset.
pub fn preset(name: &str) -> Result<&'static str> {
    Ok(match name {
        "elliptic_sin1d_smoke" => {
            "equation = elliptic\nmodel = canonical\nd = 1\neps1 = 1/8\ndelta = 1/8\ncoefficient = sin1d\nseed = 0\n"
        }
        "homogenized_sin1d_smoke" => {
            "equation = elliptic\nmodel = homogenized\nd = 1\neps1 = 1/8\ndelta = 1/8\ncoefficient = sin1d\nseed = 0\n"
        }
        "parabolic_smoke" => {
            "equation = parabolic\nmodel = canonical\nd = 1\neps1 = 1/8\ndelta = 1/8\ncoefficient = sin1d\nseed = 0\n"
        }
        "wave_smoke" => "equation = wave\nmodel = canonical\nd = 1\neps1 = 1/8\ndelta = 1/8\ncoefficient = sin1d\nseed = 0\n",
        "eps_sweep" => {
            "equation = elliptic\nmodel = canonical\nd = 1\neps1 = 1/8\ndelta = 1/64\nsweep.eps1 = 1/8, 1/16, 1/32, 1/64\n"
        }
        "h_sweep" => {
            "equation = elliptic\nmodel = canonical\nd = 1\neps1 = 1/8\ndelta = 1/8\nschrodinger = off\nsweep.mesh.N = 15, 31, 63, 127\n"
        }
        "dt_sweep" => {
            "equation = parabolic\nmodel = canonical\nd = 1\neps1 = 1/8\ndelta = 1/8\nschrodinger = off\nsweep.time.dt = 1/8, 1/16, 1/32, 1/64\n"
        }
        "table1_d1" => "experiment = table1\ntable1.d = 1\ntable1.n = 1\ntable1.eps1 = 1/8, 1/16, 1/32, 1/64\n",
        _ => return Err(Error::Config(format!("unknown preset '{name}'; known: {PRESETS:?}"))),
    })
}

/// An in-run invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value ≤ limit`.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, pass: value <= limit }
    }

    pub fn flag(name: impl Into<String>, pass: bool) -> Self {
        Check { name: name.into(), value: if pass { 1.0 } else { 0.0 }, limit: 1.0, pass }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} value={:.3e} limit={:.3e}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.value, self.limit)
    }
}

/// One CSV file held in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub file: String,
    pub bytes: Vec<u8>,
}

fn csv_output(file: &str, header: &[&str], rows: &[Vec<String>]) -> Result<Output> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(Output { file: file.into(), bytes })
}

fn with_writer(file: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Output> {
    let mut bytes = Vec::new();
    f(&mut bytes)?;
    Ok(Output { file: file.into(), bytes })
}

fn e10(x: f64) -> String {
    format!("{x:.10e}")
}

/// Headline numbers of one run, one row of a sweep summary.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub h: f64,
    pub dt: Option<f64>,
    pub dof: usize,
    pub s: usize,
    pub kappa: f64,
    pub lambda_min: f64,
    pub bound_ok: bool,
    pub l2_diff_refined: Option<f64>,
    pub classical_cost: f64,
    pub tau: f64,
    pub emulation_error: Option<f64>,
}

/// Outputs and checks of one run, before anything touches the disk.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub outputs: Vec<Output>,
    pub checks: Vec<Check>,
    /// Steps skipped on purpose, with the reason.
    pub notes: Vec<String>,
    pub summary: RunSummary,
}

/// The discretized problem of a run.
struct Solved {
    mesh: TensorMesh,
    dt: Option<f64>,
    /// Final macroscopic solution.
    u: Vec<f64>,
    /// Macroscopic states 0..=N_T of the time-dependent problems.
    trajectory: Option<Vec<Vec<f64>>>,
    /// A symmetric system for the emulation, or a nonsymmetric one that is
    /// relaxed on its normal equations.
    system: (SparseMatrix<f64>, Vec<f64>, bool),
    dof: usize,
}

/// Relative max-norm gap between CG and a direct solution `x`.
fn cg_check(name: &str, a: &SparseMatrix<f64>, f: &[f64], x: &[f64]) -> Result<Check> {
    let n = a.n_rows();
    let (y, _) = cg_solve_with(n, |p, q| a.matvec_into(p, q), f, CG_CHECK_TOL, CG_CHECK_ITER_FACTOR * n)?;
    let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    Ok(Check::at_most(name, max_abs_diff(x, &y) / scale, 1e-8))
}

fn ones(_: &[f64]) -> f64 {
    1.0
}

fn solve_problem(spec: &RunSpec, mesh: TensorMesh, dt: Option<f64>, checks: &mut Vec<Check>) -> Result<Solved> {
    let cfg = &spec.cfg;
    let coef = cfg.coefficient()?;
    let opts = AssemblyOptions::default();
    match cfg.equation {
        Equation::Elliptic => {
            let (a, f) = match cfg.model {
                Model::Canonical => (assemble_canonical::<f64>(&coef, &mesh, &opts)?, assemble_force::<f64>(&ones, &mesh)?),
                Model::Homogenized => {
                    let l = assemble_reiterated::<f64>(&coef, &mesh, &ones, &opts)?;
                    (l.matrix, l.force)
                }
            };
            let x = factorize(&a)?.solve(&f);
            if a.n_rows() <= CG_CHECK_MAX_DOF {
                checks.push(cg_check("cg_vs_direct", &a, &f, &x)?);
            }
            let n = mesh.dof()?;
            let u = x[x.len() - n..].to_vec();
            let dof = a.n_rows();
            Ok(Solved { mesh, dt: None, u, trajectory: None, system: (a, f, false), dof })
        }
        Equation::Parabolic | Equation::Wave => {
            let dt = dt.ok_or_else(|| Error::invalid("time step missing"))?;
            let n_steps = (cfg.t_final / dt - 1e-9).ceil().max(1.0) as usize;
            let m: SparseMatrix<f64> = mass_d(&mesh)?;
            let f = assemble_force::<f64>(&ones, &mesh)?;
            let n = m.n_rows();
            let forcing = move |_: f64| f.clone();
            let zero = vec![0.0; n];
            let wave = cfg.equation == Equation::Wave;
            let sys = match cfg.model {
                Model::Canonical => {
                    let a = assemble_canonical::<f64>(&coef, &mesh, &opts)?;
                    if wave {
                        BlockTimeSystem::wave_canonical(&m, &a, dt, n_steps, &forcing, &zero, &zero)?
                    } else {
                        BlockTimeSystem::parabolic_canonical(&m, &a, dt, n_steps, &forcing, &zero)?
                    }
                }
                Model::Homogenized => {
                    let l = assemble_reiterated::<f64>(&coef, &mesh, &ones, &opts)?;
                    if wave {
                        BlockTimeSystem::wave_homogenized(&m, &l.matrix, dt, n_steps, &forcing, &zero, &zero)?
                    } else {
                        BlockTimeSystem::parabolic_homogenized(&m, &l.matrix, dt, n_steps, &forcing, &zero)?
                    }
                }
            };
            let states = sys.march_reference()?;
            let dof = sys.block_size() * sys.n_steps;
            if dof <= GLOBAL_CHECK_MAX_DOF {
                let global = sys.solve_global()?;
                let mut diff: f64 = 0.0;
                let mut scale: f64 = 0.0;
                for (p, q) in states.iter().zip(&global) {
                    for (a, b) in p.iter().zip(q) {
                        diff = diff.max((a - b).abs());
                        scale = scale.max(a.abs());
                    }
                }
                checks.push(Check::at_most("global_vs_marching", diff / scale.max(f64::MIN_POSITIVE), 1e-9));
            }
            let u = sys.u_of(states.last().expect("final state")).to_vec();
            let trajectory = Some(states.iter().map(|s| sys.u_of(s).to_vec()).collect());
            let first_rhs = sys.rhs[..sys.block_size()].to_vec();
            let symmetric = sys.block_a.check_symmetric();
            Ok(Solved { mesh, dt: Some(dt), u, trajectory, system: (sys.block_a.clone(), first_rhs, !symmetric), dof })
        }
    }
}

fn bound_case(cfg: &ExperimentConfig) -> BoundCase {
    match (cfg.equation, cfg.model) {
        (Equation::Elliptic, Model::Canonical) => BoundCase::EllipticCanonical,
        (Equation::Elliptic, Model::Homogenized) if cfg.n == 1 => BoundCase::TwoScale,
        (Equation::Elliptic, Model::Homogenized) => BoundCase::Reiterated,
        (Equation::Parabolic, Model::Canonical) => BoundCase::ParabolicCanonical,
        (Equation::Parabolic, Model::Homogenized) => BoundCase::ParabolicHomogenized,
        (Equation::Wave, Model::Canonical) => BoundCase::WaveCanonical,
        (Equation::Wave, Model::Homogenized) => BoundCase::WaveHomogenized,
    }
}

/// assemble → solve → emulate → analyze → report, entirely in memory.
pub fn run_pipeline(spec: &RunSpec) -> Result<RunResult> {
    validate_spec(spec)?;
    let cfg = &spec.cfg;
    let coef = cfg.coefficient()?;
    coef.check(256, spec.seed)?;
    let params = crate::cost::select_parameters(cfg, DEFAULT_DOF_BUDGET)?;
    let n_nodes = spec.mesh_n.unwrap_or(params.n_nodes);
    let mesh = TensorMesh::new(cfg.d, n_nodes)?;
    let dt = spec.dt.or(params.dt);
    let mut checks = Vec::new();
    let solved = solve_problem(spec, mesh.clone(), dt, &mut checks)?;

    let mut rows = Vec::with_capacity(solved.u.len());
    for (i, v) in solved.u.iter().enumerate() {
        let mut r = vec![i.to_string()];
        r.extend(mesh.node_coords(i).into_iter().map(e10));
        r.push(e10(*v));
        rows.push(r);
    }
    let mut header: Vec<String> = vec!["node".into()];
    header.extend((1..=cfg.d).map(|k| format!("x{k}")));
    header.push("u".into());
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut outputs = vec![csv_output("solution.csv", &header_ref, &rows)?];
    if let (Some(states), Some(dt)) = (&solved.trajectory, solved.dt) {
        outputs.push(with_writer("trajectory.csv", |w| write_trajectory_csv(states, dt, TrajectoryLayout::Long, w))?);
    }

    // difference to a refined solve of the same problem
    let mut l2_diff_refined = None;
    if cfg.model == Model::Canonical && spec.refine >= 2 {
        let r = spec.refine;
        let fine_n = (n_nodes + 1) * r - 1;
        if (fine_n as u128).pow(cfg.d as u32) <= REFERENCE_MAX_DOF as u128 {
            let fine_mesh = TensorMesh::new(cfg.d, fine_n)?;
            let fine = solve_problem(spec, fine_mesh, dt.map(|t| t / r as f64), &mut Vec::new())?;
            let g = |x: &[f64]| evaluate_p1(&fine.mesh, &fine.u, x).unwrap_or(f64::NAN);
            let (l2, _) = l2_h1_error(&mesh, &solved.u, &g, None);
            l2_diff_refined = Some(l2);
        }
    }

    let report = verify_bounds(&BoundInput::new(bound_case(cfg), coef, mesh.clone(), solved.dt))?;
    checks.push(Check::flag("spectral_bounds", report.passes()));
    outputs.push(with_writer("spectral.csv", |w| write_report_csv(std::slice::from_ref(&report), w))?);

    let cost = evaluate_cost(cfg, DEFAULT_DOF_BUDGET)?;
    outputs.push(with_writer("cost.csv", |w| write_cost_csv(std::slice::from_ref(&cost), w))?);

    let (a, rhs, nonsym) = &solved.system;
    let emulate = match spec.emulation {
        EmulationMode::Auto => a.n_rows() <= RUN_EMULATION_MAX_DIM,
        EmulationMode::On => true,
        EmulationMode::Off => false,
    };
    let mut emulation_error = None;
    let mut notes = Vec::new();
    let mut emulated = None;
    if emulate {
        let mut opts = PipelineOptions::new(cfg.delta);
        opts.integrator = Integrator::default();
        opts.normal_equations = *nonsym;
        opts.trace_samples = 16;
        if spec.emulation == EmulationMode::Auto {
            opts.max_modes = RUN_EMULATION_MAX_MODES;
        }
        match schrodinger_solve(a, rhs, &opts) {
            Ok(rep) => emulated = Some(rep),
            Err(Error::TooLarge { what, n, limit }) if spec.emulation == EmulationMode::Auto => {
                notes.push(format!("emulation skipped: {what} needs {n} modes, automatic limit {limit}"));
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(rep) = emulated {
        let direct = factorize(a)?.solve(rhs);
        let diff: Vec<f64> = rep.u.iter().zip(&direct).map(|(p, q)| p - q).collect();
        let err = normalized_l2(&diff);
        let rel = err / normalized_l2(&direct).max(f64::MIN_POSITIVE);
        // relaxation leaves δ, the momentum grid adds O(Δp) = O(δ)
        checks.push(Check::at_most("emulation_vs_direct", rel, 2.0 * cfg.delta));
        checks.push(Check::at_most("unitarity_drift", rep.norm_drift, 1e-8));
        emulation_error = Some(rel);
        outputs.push(with_writer("schrodinger_trace.csv", |w| write_trace_csv(&rep.trace, w))?);
    }

    let summary = RunSummary {
        h: mesh.h(),
        dt: solved.dt,
        dof: solved.dof,
        s: report.s,
        kappa: report.kappa,
        lambda_min: report.lambda_min,
        bound_ok: report.passes(),
        l2_diff_refined,
        classical_cost: cost.classical_cost,
        tau: cost.tau,
        emulation_error,
    };
    Ok(RunResult { outputs, checks, notes, summary })
}

/// Record of one executed run.
#[derive(Clone, Debug)]
pub struct RunManifest {
    pub label: String,
    pub config: Option<ExperimentConfig>,
    pub seed: u64,
    pub versions: Vec<(String, String)>,
    pub outputs: Vec<PathBuf>,
    pub wall_time: f64,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn versions() -> Vec<(String, String)> {
    vec![("schrolab".into(), env!("CARGO_PKG_VERSION").into())]
}

/// Writes outputs and re-parses every file against what was written.
fn persist(dir: &Path, outputs: &[Output]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(outputs.len());
    for o in outputs {
        let p = dir.join(&o.file);
        std::fs::write(&p, &o.bytes)?;
        let expected = read_records(&o.bytes)?;
        let found = read_records(&std::fs::read(&p)?)?;
        if expected != found || expected.is_empty() {
            return Err(Error::invalid(format!("{} does not parse back to the written records", p.display())));
        }
        paths.push(p);
    }
    Ok(paths)
}

/// Parses CSV bytes into records, header first.
pub fn read_records(bytes: &[u8]) -> Result<Vec<Vec<String>>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes);
    let mut out = Vec::new();
    for rec in r.records() {
        out.push(rec?.iter().map(str::to_string).collect());
    }
    Ok(out)
}

/// Runs one configuration and writes its files into `dir`.
pub fn run(spec: &RunSpec, dir: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    let res = run_pipeline(spec)?;
    let outputs = persist(dir, &res.outputs)?;
    Ok(RunManifest {
        label: "run".into(),
        config: Some(spec.cfg.clone()),
        seed: spec.seed,
        versions: versions(),
        outputs,
        wall_time: start.elapsed().as_secs_f64(),
        checks: res.checks,
        notes: res.notes,
    })
}

pub const SWEEP_HEADER: [&str; 13] = [
    "point",
    "key",
    "value",
    "h",
    "dt",
    "dof",
    "s",
    "kappa",
    "lambda_min",
    "bound_ok",
    "l2_diff_refined",
    "classical_cost",
    "tau",
];

/// Runs every point (in parallel), writes `point_XXX/` directories and an
/// aggregated `sweep.csv`, ordered by the swept value.
pub fn sweep(spec: &SweepSpec, dir: &Path) -> Result<Vec<RunManifest>> {
    if spec.values.is_empty() {
        return Err(Error::Config("empty sweep range".into()));
    }
    let start = Instant::now();
    let points: Vec<RunSpec> = spec.values.iter().map(|&v| spec.key.apply(&spec.base, v)).collect::<Result<_>>()?;
    let results: Vec<Result<RunResult>> = points.par_iter().map(run_pipeline).collect();
    let mut manifests = Vec::new();
    let mut rows = Vec::new();
    for (i, (p, r)) in points.iter().zip(results).enumerate() {
        let r = r.map_err(|e| Error::Config(format!("sweep point {}={}: {e}", spec.key.name(), spec.values[i])))?;
        let outputs = persist(&dir.join(format!("point_{i:03}")), &r.outputs)?;
        let s = &r.summary;
        rows.push(vec![
            i.to_string(),
            spec.key.name().to_string(),
            e10(spec.values[i]),
            e10(s.h),
            s.dt.map(e10).unwrap_or_default(),
            s.dof.to_string(),
            s.s.to_string(),
            e10(s.kappa),
            e10(s.lambda_min),
            s.bound_ok.to_string(),
            s.l2_diff_refined.map(e10).unwrap_or_default(),
            e10(s.classical_cost),
            e10(s.tau),
        ]);
        manifests.push(RunManifest {
            label: format!("{}={}", spec.key.name(), spec.values[i]),
            config: Some(p.cfg.clone()),
            seed: p.seed,
            versions: versions(),
            outputs,
            wall_time: 0.0,
            checks: r.checks,
            notes: r.notes,
        });
    }
    let summary = persist(dir, &[csv_output("sweep.csv", &SWEEP_HEADER, &rows)?])?;
    manifests.push(RunManifest {
        label: "sweep".into(),
        config: None,
        seed: spec.base.seed,
        versions: versions(),
        outputs: summary,
        wall_time: start.elapsed().as_secs_f64(),
        checks: Vec::new(),
        notes: Vec::new(),
    });
    Ok(manifests)
}

pub const SYMBOLIC_HEADER: [&str; 10] = [
    "equation",
    "model",
    "cost_kind",
    "d",
    "n",
    "exponent_table",
    "exponent_derived",
    "three_table",
    "three_derived",
    "match",
];

/// The cost-table reproduction: numeric sweep over ε₁ with δ = ε₁, fitted
/// exponents and the symbolic comparison.
pub fn table1(spec: &Table1Spec, dir: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    let mut cfgs = Vec::new();
    for eq in Equation::ALL {
        for model in Model::ALL {
            if eq.time_dependent() && spec.n != 1 {
                continue;
            }
            for &e in &spec.eps {
                cfgs.push(ExperimentConfig::new(eq, model, spec.d, spec.n, e));
            }
        }
    }
    let reports = cost_sweep(&cfgs, DEFAULT_DOF_BUDGET).into_iter().collect::<Result<Vec<_>>>()?;
    let rows = fit_table1(&reports)?;
    let mut checks: Vec<Check> = rows
        .iter()
        .map(|r| {
            Check::at_most(
                format!("fit {} {} {}", r.equation.name(), r.model.name(), r.cost_kind.name()),
                (r.exponent_fit - r.exponent_theory).abs(),
                crate::cost::FIT_TOLERANCE,
            )
        })
        .collect();
    let sym = symbolic_table1(&[spec.d], &[spec.n]);
    let sym_rows: Vec<Vec<String>> = sym
        .iter()
        .map(|r| {
            vec![
                r.equation.name().into(),
                r.model.name().into(),
                r.kind.name().into(),
                r.d.to_string(),
                r.n.to_string(),
                r.table.eps.to_string(),
                r.derived.eps.to_string(),
                r.table.three.to_string(),
                r.derived.three.to_string(),
                r.matches().to_string(),
            ]
        })
        .collect();
    checks.extend(sym.iter().map(|r| {
        Check::flag(format!("symbolic {} {} {}", r.equation.name(), r.model.name(), r.kind.name()), r.matches())
    }));
    let outputs = vec![
        with_writer("table1.csv", |w| write_table1_csv(&rows, w))?,
        with_writer("table1_costs.csv", |w| write_cost_csv(&reports, w))?,
        csv_output("table1_symbolic.csv", &SYMBOLIC_HEADER, &sym_rows)?,
    ];
    let outputs = persist(dir, &outputs)?;
    Ok(RunManifest {
        label: "table1".into(),
        config: None,
        seed: spec.seed,
        versions: versions(),
        outputs,
        wall_time: start.elapsed().as_secs_f64(),
        checks,
        notes: Vec::new(),
    })
}

/// Dispatches an experiment inside a pool of `jobs` workers.
pub fn execute(exp: &Experiment, dir: &Path, jobs: usize) -> Result<Vec<RunManifest>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    pool.install(|| match exp {
        Experiment::Run(s) => Ok(vec![run(s, dir)?]),
        Experiment::Sweep(s) => sweep(s, dir),
        Experiment::Table1(s) => Ok(vec![table1(s, dir)?]),
    })
}

pub const VERIFY_HEADER: [&str; 4] = ["check", "value", "limit", "pass"];

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

fn verify_checks() -> Result<Vec<Check>> {
    use crate::fem::{mass_1d, stiffness_1d, MultiscaleCoefficient};
    use crate::homogenization::harmonic_mean;
    use crate::schrodinger::{relaxation_solve, RelaxationMethod};
    use crate::Rational;
    let mut checks = Vec::new();

    // 1D element matrices against exact rational arithmetic
    let mut entry_err: f64 = 0.0;
    for n in [1usize, 3, 7, 31] {
        let mesh = TensorMesh::new(1, n)?;
        for (fl, ex) in [
            (mass_1d::<f64>(&mesh), mass_1d::<Rational>(&mesh)),
            (stiffness_1d::<f64>(&mesh), stiffness_1d::<Rational>(&mesh)),
        ] {
            for (i, j, v) in ex.triplets() {
                let exact = *v.numer() as f64 / *v.denom() as f64;
                entry_err = entry_err.max((fl.get(i, j) - exact).abs() / exact.abs().max(1.0));
            }
        }
    }
    checks.push(Check::at_most("element_matrix_entries", entry_err, 1e-15));

    // operator bounds and interior sparsity on small meshes
    let sin1d = MultiscaleCoefficient::preset("sin1d", 1, vec![0.25])?;
    let mesh7 = TensorMesh::new(1, 7)?;
    let mut cases = vec![
        (BoundCase::EllipticCanonical, sin1d.clone(), mesh7.clone()),
        (BoundCase::TwoScale, sin1d.clone(), mesh7.clone()),
        (BoundCase::ParabolicCanonical, sin1d.clone(), mesh7.clone()),
        (BoundCase::ParabolicHomogenized, sin1d.clone(), mesh7.clone()),
        (BoundCase::WaveCanonical, sin1d.clone(), mesh7.clone()),
        (BoundCase::WaveHomogenized, sin1d.clone(), mesh7.clone()),
    ];
    for d in 2..=3 {
        let c = MultiscaleCoefficient::preset("product_nscale", d, vec![0.25])?;
        cases.push((BoundCase::EllipticCanonical, c, TensorMesh::new(d, 7)?));
    }
    for (case, coef, mesh) in cases {
        let rep = verify_bounds(&BoundInput::new(case, coef, mesh, None))?;
        checks.push(Check::flag(format!("bounds_{}_d{}", case.name(), rep.d), rep.passes()));
    }

    // CG against the direct factorization
    let coef2 = MultiscaleCoefficient::preset("product_nscale", 2, vec![0.25])?;
    let mesh2 = TensorMesh::new(2, 15)?;
    let a = assemble_canonical::<f64>(&coef2, &mesh2, &AssemblyOptions::default())?;
    let f = assemble_force::<f64>(&ones, &mesh2)?;
    let x = factorize(&a)?.solve(&f);
    checks.push(cg_check("cg_vs_direct_d2", &a, &f, &x)?);

    // global space-time solves against marching for every layout
    for (eq, model) in [
        (Equation::Parabolic, Model::Canonical),
        (Equation::Parabolic, Model::Homogenized),
        (Equation::Wave, Model::Canonical),
        (Equation::Wave, Model::Homogenized),
    ] {
        let mut cfg = ExperimentConfig::new(eq, model, 1, 1, 0.25);
        cfg.delta = 0.125;
        let spec = RunSpec { cfg, seed: 0, mesh_n: Some(7), dt: Some(0.125), emulation: EmulationMode::Off, refine: 0 };
        let mut local = Vec::new();
        solve_problem(&spec, mesh7.clone(), spec.dt, &mut local)?;
        for c in local {
            checks.push(Check { name: format!("{}_{}_{}", c.name, eq.name(), model.name()), ..c });
        }
    }

    // 1D homogenized coefficient of 2 + sin 2πy is √3
    let a0 = harmonic_mean(&|y| 2.0 + (2.0 * std::f64::consts::PI * y).sin());
    checks.push(Check::at_most("harmonic_mean", (a0 - 3f64.sqrt()).abs(), 1e-8));

    // scalar emulation: du/dt = -2u + 4 relaxes to 2
    let a1 = SparseMatrix::from_dense(&[vec![2.0]]);
    let opts = PipelineOptions::new(1e-3);
    let rep = schrodinger_solve(&a1, &[4.0], &opts)?;
    checks.push(Check::at_most("emulation_scalar", (rep.u[0] - 2.0).abs() / 2.0, 1e-3));
    checks.push(Check::at_most("unitarity_drift_scalar", rep.norm_drift, 1e-8));

    // relaxation through the emulator on the d=1, N=7 system
    let a7 = assemble_canonical::<f64>(&sin1d, &mesh7, &AssemblyOptions::default())?;
    let f7 = assemble_force::<f64>(&ones, &mesh7)?;
    let direct = factorize(&a7)?.solve(&f7);
    let relaxed =
        relaxation_solve(&a7, &f7, &vec![0.0; 7], 1e-2, RelaxationMethod::Schrodinger(PipelineOptions::new(1e-2)))?;
    let diff: Vec<f64> = relaxed.u.iter().zip(&direct).map(|(p, q)| p - q).collect();
    checks.push(Check::at_most("emulation_elliptic_n7", normalized_l2(&diff), 1e-2));
    Ok(checks)
}

/// Fast invariant suite; writes `verify.csv`.
pub fn verify_suite(dir: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    let checks = verify_checks()?;
    let rows: Vec<Vec<String>> =
        checks.iter().map(|c| vec![c.name.clone(), e10(c.value), e10(c.limit), c.pass.to_string()]).collect();
    let outputs = persist(dir, &[csv_output("verify.csv", &VERIFY_HEADER, &rows)?])?;
    Ok(RunManifest {
        label: "verify".into(),
        config: None,
        seed: 0,
        versions: versions(),
        outputs,
        wall_time: start.elapsed().as_secs_f64(),
        checks,
        notes: Vec::new(),
    })
}
