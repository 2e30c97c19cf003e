use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mfl::{run, ExecMode, Overrides, Scenario, SimConfig};

/// Mean-field laser solvers: master equation, Lorenz equations, stochastic
/// unraveling and the verification suite.
#[derive(Debug, Parser)]
#[command(name = "mfl", version)]
struct Cli {
    /// Scenario to run (overrides the config's `scenario`).
    scenario: Scenario,
    /// Key-value or JSON config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    #[arg(long = "n-max")]
    n_max: Option<usize>,
    /// Run trajectories on the calling thread only.
    #[arg(long)]
    serial: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(path) => match SimConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("mfl: config error: {e}");
                return ExitCode::from(2);
            }
        },
        None => SimConfig::default(),
    };
    config.apply(&Overrides {
        scenario: Some(cli.scenario),
        out: cli.out,
        seed: cli.seed,
        trajectories: cli.trajectories,
        dt: cli.dt,
        t_final: cli.t_final,
        n_max: cli.n_max,
    });
    let mode = if cli.serial { ExecMode::Serial } else { ExecMode::Parallel };
    match run(&config, mode) {
        Ok(outcome) => {
            if let Some(report) = &outcome.report {
                print!("{}", report.to_text());
            }
            println!("wrote {} files to {}", outcome.files.len(), outcome.out_dir.display());
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("mfl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
