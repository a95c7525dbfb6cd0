use schrolab::harness::{
    execute, parse_config, parse_experiment, parse_number, preset, read_records, run, EmulationMode, Experiment,
    SweepKey, PRESETS,
};
use schrolab::Error;
use std::path::Path;

const SMOKE: &str = "equation = elliptic\nmodel = canonical\nd = 1\neps1 = 1/8\ndelta = 1/8\ncoefficient = sin1d\n";

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn numbers_and_comments() {
    assert_eq!(parse_number("1/8").unwrap(), 0.125);
    assert_eq!(parse_number(" 2.5e-1 ").unwrap(), 0.25);
    assert!(parse_number("1/0").is_err());
    assert!(parse_number("x").is_err());
    let raw = parse_config("# header\n a = 1 # trailing\n\nb=2\n").unwrap();
    assert_eq!(raw.entries.len(), 2);
    assert_eq!(raw.entries["a"], "1");
    assert!(parse_config("a = 1\na = 2\n").is_err());
    assert!(parse_config("no equals sign\n").is_err());
}

#[test]
fn missing_and_unknown_keys_are_named() {
    match parse_experiment("") {
        Err(Error::MissingKeys(k)) => assert_eq!(k, ["equation", "model", "d", "eps1", "delta"]),
        other => panic!("{other:?}"),
    }
    match parse_experiment(&format!("{SMOKE}colour = blue\n")) {
        Err(Error::UnknownKeys(k)) => assert_eq!(k, ["colour"]),
        other => panic!("{other:?}"),
    }
    assert!(parse_experiment(&format!("{SMOKE}schrodinger = maybe\n")).is_err());
    assert!(parse_experiment(&format!("{SMOKE}time.dt = 0.1\n")).is_err());
    assert!(parse_experiment("experiment = nope\n").is_err());
}

#[test]
fn sweep_lists_are_validated_and_sorted() {
    assert!(parse_experiment(&format!("{SMOKE}sweep.mesh.N = \n")).is_err());
    assert!(parse_experiment(&format!("{SMOKE}sweep.mesh.N = 7, 15, 7\n")).is_err());
    assert!(parse_experiment(&format!("{SMOKE}sweep.mesh.N = 7.5\n")).is_err());
    assert!(parse_experiment(&format!("{SMOKE}sweep.mesh.N = 7\nsweep.eps1 = 1/8\n")).is_err());
    let a = parse_experiment(&format!("{SMOKE}sweep.mesh.N = 31, 7, 15\n")).unwrap();
    let b = parse_experiment(&format!("{SMOKE}sweep.mesh.N = 7, 15, 31\n")).unwrap();
    assert_eq!(a, b);
    match a {
        Experiment::Sweep(s) => {
            assert_eq!(s.key, SweepKey::MeshN);
            assert_eq!(s.values, vec![7.0, 15.0, 31.0]);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn every_preset_parses() {
    for name in PRESETS {
        parse_experiment(preset(name).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    assert!(preset("nope").is_err());
    match parse_experiment(preset("h_sweep").unwrap()).unwrap() {
        Experiment::Sweep(s) => assert_eq!(s.base.emulation, EmulationMode::Off),
        other => panic!("{other:?}"),
    }
}

#[test]
fn smoke_run_writes_parseable_outputs_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = match parse_experiment(preset("elliptic_sin1d_smoke").unwrap()).unwrap() {
        Experiment::Run(s) => s,
        other => panic!("{other:?}"),
    };
    let m = run(&spec, dir.path()).unwrap();
    assert!(m.passed(), "{:?}", m.checks);
    let names: Vec<String> = m.outputs.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for f in ["solution.csv", "spectral.csv", "cost.csv", "schrodinger_trace.csv"] {
        assert!(names.iter().any(|n| n == f), "missing {f} in {names:?}");
    }
    for p in &m.outputs {
        let recs = read_records(&std::fs::read(p).unwrap()).unwrap();
        assert!(recs.len() >= 2, "{} has no data rows", p.display());
        assert!(recs.iter().all(|r| r.len() == recs[0].len()));
    }
}

#[test]
fn single_point_sweep_matches_a_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    execute(&parse_experiment(&format!("{SMOKE}mesh.N = 7\n")).unwrap(), a.path(), 1).unwrap();
    execute(&parse_experiment(&format!("{SMOKE}sweep.mesh.N = 7\n")).unwrap(), b.path(), 1).unwrap();
    let run_files = files(a.path());
    let point: Vec<(String, Vec<u8>)> = files(&b.path().join("point_000"));
    assert_eq!(run_files, point);
    assert!(b.path().join("sweep.csv").exists());
}

#[test]
fn outputs_do_not_depend_on_workers_or_list_order() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let texts = [
        format!("{SMOKE}schrodinger = off\nsweep.mesh.N = 7, 15, 31\n"),
        format!("{SMOKE}schrodinger = off\nsweep.mesh.N = 31, 7, 15\n"),
        format!("{SMOKE}schrodinger = off\nsweep.mesh.N = 15, 31, 7\n"),
    ];
    for ((t, d), jobs) in texts.iter().zip(&dirs).zip([1, 4, 2]) {
        execute(&parse_experiment(t).unwrap(), d.path(), jobs).unwrap();
    }
    let first = files(dirs[0].path());
    assert_eq!(first.len(), 3 * 3 + 1);
    for d in &dirs[1..] {
        assert_eq!(files(d.path()), first);
    }
}
