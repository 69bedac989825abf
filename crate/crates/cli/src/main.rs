use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use stefan_core::{solve, Trajectory};
use stefan_kit::export;
use stefan_kit::scenario::{parse_scenario, Overrides};
use stefan_kit::suites::{run_suite, Suite, SuiteOptions};

/// Enthalpy solver for the two-phase Stefan problem, with verification suites.
///
/// Outputs go under the output root: `--out`, else `$STEFAN_KIT_OUT`, else `out`.
#[derive(Debug, Parser)]
#[command(name = "stefan-kit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the cell count (per axis).
    #[arg(long, global = true)]
    cells: Option<usize>,
    /// Override the time step.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Override the fraction of the explicit stability limit used as time step.
    #[arg(long, global = true)]
    cfl: Option<f64>,
    /// Output root directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of the randomized suites.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a scenario file (TOML, or JSON by extension).
    Run { file: PathBuf },
    /// Run a verification suite; exits with status 1 on any violation.
    Verify { suite: Suite },
    /// Barrier constructors.
    Barriers {
        #[command(subcommand)]
        action: BarriersAction,
    },
    /// Exact solutions.
    Oracle {
        #[command(subcommand)]
        action: OracleAction,
    },
    /// Post-process a trajectory directory.
    Analyze {
        #[command(subcommand)]
        action: AnalyzeAction,
    },
}

#[derive(Debug, Subcommand)]
enum BarriersAction {
    /// Sample every gallery barrier and classify it.
    Gallery,
}

#[derive(Debug, Subcommand)]
enum OracleAction {
    /// Sample the travelling wave and Neumann solutions.
    Dump,
}

#[derive(Debug, Subcommand)]
enum AnalyzeAction {
    /// Interface positions, velocities and Stefan residuals.
    Interface { trajdir: PathBuf },
}

fn output_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("STEFAN_KIT_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: Cli) -> Result<bool> {
    let root = output_root(cli.out);
    match cli.command {
        Command::Run { file } => {
            let scenario = parse_scenario(&file)?;
            let stem = file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into());
            let overrides = Overrides {
                cells: cli.cells,
                dt: cli.dt,
                cfl: cli.cfl,
            };
            let prepared = scenario.prepare(&stem, &overrides)?;
            let traj = solve(&prepared.spec, &prepared.options)?;
            let dir = root.join(&prepared.output_name);
            export::write_run(&traj, &dir, prepared.vtk)?;
            println!(
                "{} steps (dt = {:e}), {} snapshots written to {}",
                traj.steps(),
                traj.dt(),
                traj.len(),
                dir.display()
            );
            Ok(true)
        }
        Command::Verify { suite } => {
            let opts = SuiteOptions {
                cells: cli.cells,
                cfl: cli.cfl,
                seed: cli.seed,
            };
            let dir = root.join("verify").join(suite.name());
            let report = run_suite(suite, &opts, &dir)?;
            for r in report.failures() {
                println!("violation: {} {} = {:e} (bound {:e})", r.case, r.metric, r.value, r.bound);
            }
            let verdict = if report.passed() { "PASS" } else { "FAIL" };
            println!("{suite} {verdict}: {} checks, table in {}", report.rows.len(), dir.display());
            Ok(report.passed())
        }
        Command::Barriers {
            action: BarriersAction::Gallery,
        } => {
            let dir = root.join("barriers");
            let ok = export::barrier_gallery(&dir, 10_000)?;
            println!("gallery written to {}; all kinds confirmed: {ok}", dir.display());
            Ok(ok)
        }
        Command::Oracle {
            action: OracleAction::Dump,
        } => {
            let dir = root.join("oracles");
            export::oracle_dump(&dir, cli.cells.unwrap_or(200))?;
            println!("oracles written to {}", dir.display());
            Ok(true)
        }
        Command::Analyze {
            action: AnalyzeAction::Interface { trajdir },
        } => {
            let traj = Trajectory::read_dir(&trajdir)
                .with_context(|| format!("reading trajectory {}", trajdir.display()))?;
            let name = trajdir
                .canonicalize()
                .ok()
                .as_deref()
                .and_then(Path::file_name)
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "trajectory".into());
            let path = root.join("analysis").join(name).join("interface.csv");
            export::write_interface(&traj, &path)?;
            println!("interface written to {}", path.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
