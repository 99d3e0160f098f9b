use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gridswap::sim::{parse_scenario, run_scenario, verify_artifacts, write_artifacts, SimError};

#[derive(Parser)]
#[command(name = "gridswap", version, about = "Private constant-product energy exchange simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-check the artifacts of a previous run.
    Verify {
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(scenario: &Path, out: &Path, seed: Option<u64>) -> Result<(), SimError> {
    let text = std::fs::read_to_string(scenario)
        .map_err(|e| SimError::Config(format!("{}: {e}", scenario.display())))?;
    let mut sc = parse_scenario(&text)?;
    if let Some(seed) = seed {
        sc.seed = seed;
    }
    let output = run_scenario(&sc)?;
    write_artifacts(out, &output)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match cli.command {
        Command::Run { scenario, out, seed } => match run(&scenario, &out, seed) {
            Ok(()) => {
                println!("wrote {}", out.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Command::Verify { out } => match verify_artifacts(&out) {
            Ok(()) => {
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
