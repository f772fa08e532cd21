use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use patchbeam::output::{self, DEFLECTION_HEADER, SPECTRUM_HEADER, SWEEP_HEADER, TIMING_HEADER, TRAJECTORY_HEADER};
use patchbeam::run::{self, SweepParam};
use patchbeam::scenario::{load_scenario, Scenario};
use patchbeam::{Error, Result};

/// Patch-scheme simulation of graded viscoelastic cantilever beams.
#[derive(Parser)]
#[command(name = "patchbeam", version)]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV output path; defaults to the scenario's output.path, then stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the random grading.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Static deflection under the tip load.
    Static,
    /// Lowest-frequency eigenmodes.
    Modes {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Free vibration from the initial bend.
    Simulate {
        #[arg(long)]
        t_final: Option<f64>,
    },
    /// Timings against the full-domain counterpart.
    Bench,
    /// Repeat static and modal runs over parameter values.
    Sweep {
        /// exponent_a, N_patches or P.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, default_value = "")]
        values: String,
    },
}

fn emit<R: Serialize>(path: Option<&PathBuf>, header: &[&str], rows: &[R]) -> Result<()> {
    match path {
        Some(p) => output::write_file(p, header, rows),
        None => output::write_rows(std::io::stdout().lock(), header, rows),
    }
}

fn parse_values(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::config("sweep.values", format!("`{s}` is not a number"))))
        .collect()
}

fn report(lines: Vec<String>) {
    let mut err = std::io::stderr().lock();
    for l in lines {
        let _ = writeln!(err, "{l}");
    }
}

fn execute(cli: Cli) -> Result<()> {
    let config = cli.config.ok_or_else(|| Error::config("--config", "a scenario file is required"))?;
    let mut scenario: Scenario = load_scenario(&config)?;
    if let Some(seed) = cli.seed {
        scenario = scenario.with_seed(seed);
    }
    let out = cli.out.or_else(|| scenario.output.path.as_ref().map(PathBuf::from));
    match cli.command {
        Command::Static => {
            let (rows, r) = run::run_static(&scenario)?;
            emit(out.as_ref(), &DEFLECTION_HEADER, &rows)?;
            report(r.summary());
        }
        Command::Modes { count } => {
            let (rows, _, r) = run::run_modes(&scenario, count.unwrap_or(scenario.solver.eigen_count))?;
            emit(out.as_ref(), &SPECTRUM_HEADER, &rows)?;
            report(r.summary());
        }
        Command::Simulate { t_final } => {
            let t_final = t_final.unwrap_or(scenario.output.t_final);
            if !(t_final > 0.0 && t_final.is_finite()) {
                return Err(Error::config("--t-final", "must be positive"));
            }
            let (rows, r) = run::run_simulate(&scenario, t_final)?;
            emit(out.as_ref(), &TRAJECTORY_HEADER, &rows)?;
            report(r.summary());
        }
        Command::Bench => {
            let b = run::run_bench(&scenario)?;
            emit(out.as_ref(), &TIMING_HEADER, &b.rows)?;
            report(vec![
                format!("coverage {}", b.coverage),
                format!("rhs_ratio {}", b.rhs_ratio),
                format!("static_ratio {}", b.static_ratio),
            ]);
        }
        Command::Sweep { param, values } => {
            let param = SweepParam::parse(&param)?;
            let values = parse_values(&values)?;
            let rows = run::run_sweep(&scenario, param, &values, cli.threads)?;
            emit(out.as_ref(), &SWEEP_HEADER, &rows)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
