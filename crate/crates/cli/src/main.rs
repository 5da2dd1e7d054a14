use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lambdaflow_cli::config::{parse_config, RawConfig};
use lambdaflow_cli::{run_scenario, RunError};

#[derive(Parser)]
#[command(name = "lambdaflow", version, about = "Run the lambdaflow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV and JSON artifacts.
    Run {
        scenario: String,
        /// TOML file overriding the scenario defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of time levels exported as field CSVs.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// List the available scenarios.
    List,
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("LAMBDAFLOW_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("LAMBDAFLOW_THREADS must be a positive integer, got `{v}`"))?;
    if n == 0 {
        return Err("LAMBDAFLOW_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn run(scenario: &str, config: Option<PathBuf>, out: PathBuf, seed: u64, levels: Option<usize>) -> Result<bool, RunError> {
    let raw = match config {
        Some(path) => parse_config(&path)?,
        None => RawConfig::default(),
    };
    let (_, outcome) = run_scenario(scenario, &raw, seed, levels)?;
    outcome.artifacts.write_all(&out)?;
    for c in &outcome.report.checks {
        let tag = match (c.passed, c.gating) {
            (true, _) => "pass",
            (false, true) => "FAIL",
            (false, false) => "note",
        };
        println!("{tag:4}  {:<48} {:>14.6e}  (threshold {:.6e})", c.name, c.measured, c.threshold);
    }
    println!("{}: {}", scenario, if outcome.report.passed { "passed" } else { "FAILED" });
    Ok(outcome.report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match cli.command {
        Command::List => {
            for s in lambdaflow_cli::SCENARIOS {
                println!("{s}");
            }
            ExitCode::SUCCESS
        }
        Command::Run { scenario, config, out, seed, levels } => match run(&scenario, config, out, seed, levels) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
