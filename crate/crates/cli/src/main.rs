//! `fluxlim`: runs experiment specs and reports whether the theory checks
//! held.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fluxlim_core::harness::{ExperimentRegistry, ExperimentSpec, Report, RunContext};

const LOG_ENV: &str = "FLUXLIM_LOG";
const DEFAULT_OUT: &str = "fluxlim-out";

#[derive(Parser)]
#[command(
    name = "fluxlim",
    version,
    about = "Flux-limited chemotaxis simulator and experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment spec (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Single trajectory or ordered comparison pair.
    Run(Common),
    /// Bisection for the mass threshold.
    Sweep(Common),
    /// Grid refinement study.
    Converge(Common),
    /// Regularized against plain trajectories.
    EpsStudy(Common),
}

impl Command {
    fn parts(&self) -> (&Common, &'static str, &'static [&'static str]) {
        match self {
            Command::Run(c) => (c, "single", &["single", "comparison"]),
            Command::Sweep(c) => (c, "mass_sweep", &["mass_sweep"]),
            Command::Converge(c) => (c, "grid_convergence", &["grid_convergence"]),
            Command::EpsStudy(c) => (c, "epsilon_study", &["epsilon_study"]),
        }
    }
}

fn execute(cli: &Cli) -> fluxlim_core::Result<(Report, PathBuf)> {
    let (common, default_kind, allowed) = cli.command.parts();
    let spec = ExperimentSpec::from_file(&common.config)?;
    let out_dir = common
        .out
        .clone()
        .or_else(|| spec.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let ctx = RunContext {
        out_dir: Some(out_dir.clone()),
        jobs: common.jobs,
    };
    let report = ExperimentRegistry::with_builtins().run(&spec, default_kind, allowed, &ctx)?;
    Ok((report, out_dir))
}

fn print_report(report: &Report, out: &Path) {
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {}", c.name, c.detail);
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    println!("results in {}", out.display());
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "off"))
        .format_timestamp(None)
        .init();
    // clap exits with 2 on usage errors, which is reserved for failed checks
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli) {
        Ok((report, out)) => {
            print_report(&report, &out);
            if report.checks_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
