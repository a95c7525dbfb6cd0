use anyhow::{bail, Context, Result};
use clap::Parser;
use schrolab::harness::{execute, parse_experiment, preset, verify_suite, RunManifest, PRESETS};
use std::path::PathBuf;
use std::process::ExitCode;

/// Multiscale PDE experiments: assembly, solves, Schrödingerization
/// emulation, spectral checks and cost accounting, written as CSV.
#[derive(Parser, Debug)]
#[command(name = "schrolab", version)]
struct Cli {
    /// key=value experiment config
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in config by name
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Worker threads
    #[arg(long, value_name = "N", default_value_t = 1)]
    jobs: usize,
    /// Run the invariant suite
    #[arg(long)]
    verify: bool,
    /// Run the cost-table reproduction sweep
    #[arg(long)]
    table1: bool,
    /// List presets and exit
    #[arg(long)]
    list_presets: bool,
}

fn print_manifest(m: &RunManifest) {
    println!("[{}] seed={} wall_time={:.3}s", m.label, m.seed, m.wall_time);
    if let Some(cfg) = &m.config {
        println!(
            "  config: equation={} model={} d={} n={} eps1={} delta={} T={}",
            cfg.equation.name(),
            cfg.model.name(),
            cfg.d,
            cfg.n,
            cfg.eps1,
            cfg.delta,
            cfg.t_final
        );
    }
    for (name, v) in &m.versions {
        println!("  version: {name} {v}");
    }
    for p in &m.outputs {
        println!("  output: {}", p.display());
    }
    for c in &m.checks {
        println!("  {c}");
    }
    for n in &m.notes {
        println!("  note: {n}");
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    let cli = Cli::parse();
    if cli.list_presets {
        for p in PRESETS {
            println!("{p}");
        }
        return Ok(true);
    }
    if cli.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    let sources = [cli.config.is_some(), cli.preset.is_some(), cli.verify, cli.table1];
    match sources.iter().filter(|s| **s).count() {
        0 => bail!("nothing to do: pass --config, --preset, --verify or --table1"),
        1 => {}
        _ => bail!("--config, --preset, --verify and --table1 are mutually exclusive"),
    }
    let manifests = if cli.verify {
        vec![verify_suite(&cli.out)?]
    } else {
        let text = if let Some(path) = &cli.config {
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
        } else if let Some(name) = &cli.preset {
            preset(name)?.to_string()
        } else {
            preset("table1_d1")?.to_string()
        };
        let exp = parse_experiment(&text).context("invalid config")?;
        execute(&exp, &cli.out, cli.jobs)?
    };
    let mut ok = true;
    for m in &manifests {
        print_manifest(m);
        ok &= m.passed();
    }
    println!("{}", if ok { "all checks passed" } else { "some checks FAILED" });
    Ok(ok)
}
