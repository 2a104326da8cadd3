//! `catm-sim`: run a scenario file or one of the canned studies and write
//! CSV results.
//!
//! Exit codes: 0 on success, 2 for configuration or input errors, 3 when a
//! runtime invariant is breached, 1 for anything else (e.g. an unwritable
//! output directory).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use catm::sim::{run, run_preset, write_trace_csv, Preset, PresetOptions, Scenario};
use catm::Error;
use clap::{ArgGroup, Parser};

#[derive(Debug, Parser)]
#[command(name = "catm-sim", version, about = "TTI-level LTE Cat-M system simulator")]
#[command(group(ArgGroup::new("input").required(true).args(["scenario", "preset"])))]
struct Args {
    /// Scenario TOML file.
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,

    /// Canned study: fig3, fig4a, fig4b, fig4c, fig4d, table2 or voip.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,

    /// Overrides the scenario seed; the first seed of a preset sweep.
    #[arg(long)]
    seed: Option<u64>,

    /// Overrides the simulated duration.
    #[arg(long, value_name = "MS")]
    duration_ms: Option<u64>,

    /// Seeds per point in preset sweeps.
    #[arg(long, default_value_t = 5)]
    seeds: u32,

    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Also write a per-TTI transmission trace (scenario runs only).
    #[arg(long)]
    trace: bool,
}

#[derive(Debug)]
enum Failure {
    Sim(Error),
    Output(PathBuf, std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Sim(e)
    }
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    let p = dir.join(name);
    fs::write(&p, contents).map_err(|e| Failure::Output(p, e))
}

fn run_scenario(args: &Args, path: &Path) -> Result<String, Failure> {
    let mut sc = Scenario::load(path)?;
    if let Some(s) = args.seed {
        sc.seed = s;
    }
    if let Some(d) = args.duration_ms {
        sc.duration_ms = d;
    }
    let out = run(&sc, args.trace)?;
    fs::create_dir_all(&args.out).map_err(|e| Failure::Output(args.out.clone(), e))?;
    let r = &out.report;
    write(&args.out, "kpi.csv", r.kpi_csv_string())?;
    let mut cells = Vec::new();
    r.write_cells_csv(&mut cells)?;
    write(&args.out, "cells.csv", cells)?;
    write(&args.out, "summary.json", r.summary_json())?;
    let text = r.summary_text();
    write(&args.out, "summary.txt", &text)?;
    if let Some(rows) = &out.trace {
        let mut buf = Vec::new();
        write_trace_csv(rows, &mut buf)?;
        write(&args.out, "trace.csv", buf)?;
    }
    Ok(text)
}

fn run_named(args: &Args, name: &str) -> Result<String, Failure> {
    let preset: Preset = name.parse()?;
    let opts = PresetOptions { seed: args.seed.unwrap_or(1), duration_ms: args.duration_ms, seeds: args.seeds };
    let out = run_preset(preset, &opts)?;
    fs::create_dir_all(&args.out).map_err(|e| Failure::Output(args.out.clone(), e))?;
    for a in &out.artifacts {
        write(&args.out, &a.name, &a.contents)?;
    }
    write(&args.out, "summary.txt", &out.summary)?;
    let files: Vec<_> = out.artifacts.iter().map(|a| a.name.as_str()).collect();
    Ok(format!("{}wrote {}\n", out.summary, files.join(", ")))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let res = match (&args.scenario, &args.preset) {
        (Some(p), None) => run_scenario(&args, p),
        (None, Some(n)) => run_named(&args, n),
        _ => unreachable!("clap enforces exactly one input"),
    };
    match res {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(Failure::Sim(e)) => {
            eprintln!("error: {e}");
            if let Error::Invariant { trace, .. } = &e {
                for line in trace {
                    eprintln!("  {line}");
                }
            }
            ExitCode::from(if e.is_invariant() {
                3
            } else if e.is_config() {
                2
            } else {
                1
            })
        }
        Err(Failure::Output(p, e)) => {
            eprintln!("error: cannot write {}: {e}", p.display());
            ExitCode::FAILURE
        }
    }
}
