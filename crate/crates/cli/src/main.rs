mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Common;

/// Soil-column heat conduction with freezing and thawing.
#[derive(Debug, Parser)]
#[command(name = "stefan", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one scenario and write trajectory.csv, stats.csv and histogram.csv.
    Run(CommonArgs),
    /// Neumann benchmark over a doubling resolution ladder.
    Convergence(CommonArgs),
    /// Enthalpy method against implicit and explicit DECP on the Neumann benchmark.
    Compare(CommonArgs),
    /// Randomized implicit steps solved from several initial guesses.
    Stress(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for every random draw (required by `stress`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the studies (defaults to the available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// explicit | backward-euler | crank-nicolson | decp-implicit | decp-explicit
    #[arg(long)]
    scheme: Option<String>,
    /// Absolute stopping tolerance of the nonlinear solver.
    #[arg(long)]
    tol_abs: Option<f64>,
    /// Relative stopping tolerance of the nonlinear solver.
    #[arg(long)]
    tol_rel: Option<f64>,
    /// Enthalpy scale used for face snapping and corner perturbations.
    #[arg(long)]
    enthalpy_scale: Option<f64>,
}

impl From<CommonArgs> for Common {
    fn from(a: CommonArgs) -> Self {
        Common {
            config: a.config,
            out: a.out,
            seed: a.seed,
            workers: a
                .workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
            scheme: a.scheme,
            tol_abs: a.tol_abs,
            tol_rel: a.tol_rel,
            enthalpy_scale: a.enthalpy_scale,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => commands::cmd_run(&a.into()),
        Command::Convergence(a) => commands::cmd_convergence(&a.into()),
        Command::Compare(a) => commands::cmd_compare(&a.into()),
        Command::Stress(a) => commands::cmd_stress(&a.into()),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
