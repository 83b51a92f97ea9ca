//! `ifl`: closed forms, simulation, enumeration, sweeps and the interaction
//! tensor pipeline from the command line.

mod error;
mod model_cmds;
mod params;
mod sweep_cmds;
mod tensor_cmds;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ifl", version, about = "Feature-learning framework toolkit")]
struct Cli {
    /// Worker threads (falls back to IFL_THREADS; results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form accuracy, agreement and event probabilities.
    ClosedForm(model_cmds::ModelArgs),
    /// Monte-Carlo estimates next to the closed forms.
    Simulate(model_cmds::SimulateArgs),
    /// Exact values by exhaustive enumeration (small instances only).
    Enumerate(model_cmds::ModelArgs),
    /// Parameter sweep to CSV.
    Sweep(sweep_cmds::SweepArgs),
    /// Coverage bound sweep over beta to CSV.
    Coverage(sweep_cmds::CoverageArgs),
    /// Interaction tensor construction and analysis.
    #[command(subcommand)]
    Tensor(TensorCommand),
    /// Most similar data to one datum by shared features.
    Neighbors(tensor_cmds::NeighborsArgs),
}

#[derive(Debug, Subcommand)]
enum TensorCommand {
    /// Build the interaction tensor from a manifest of activation files.
    Build(tensor_cmds::BuildArgs),
    /// Write one observation report as CSV.
    Analyze(tensor_cmds::AnalyzeArgs),
}

fn configure_threads(flag: Option<usize>) -> CliResult<()> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var("IFL_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| CliError::usage(format!("IFL_THREADS must be a positive integer, got {v:?}")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::usage("thread count must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot configure threads: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<Value> {
    configure_threads(cli.threads)?;
    match &cli.command {
        Command::ClosedForm(a) => model_cmds::closed_form(a),
        Command::Simulate(a) => model_cmds::simulate(a),
        Command::Enumerate(a) => model_cmds::enumerate(a),
        Command::Sweep(a) => sweep_cmds::sweep(a),
        Command::Coverage(a) => sweep_cmds::coverage(a),
        Command::Tensor(TensorCommand::Build(a)) => tensor_cmds::build(a),
        Command::Tensor(TensorCommand::Analyze(a)) => tensor_cmds::analyze(a),
        Command::Neighbors(a) => tensor_cmds::neighbors(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(value) => {
            let text = serde_json::to_string_pretty(&value).expect("output serializes");
            // A closed pipe downstream is not an error for us.
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
