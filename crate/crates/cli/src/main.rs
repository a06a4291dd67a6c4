//! Command-line driver: gradient checking, training, evaluation,
//! backtesting, and multi-run comparison over one shared TOML config format.
//!
//! Exit codes: 0 success (also help/version), 1 usage or configuration
//! problems, 2 data problems (missing or malformed files, shape mismatches),
//! 3 numerical failures (divergence, failed gradient checks, degenerate
//! metrics).

mod commands;
mod config;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use ecnn_core::Error;

#[derive(Parser, Debug)]
#[command(
    name = "ecnn",
    version,
    about = "Error-correction recurrent networks for financial time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare hand-coded gradients against finite differences.
    Gradcheck(commands::gradcheck::GradcheckArgs),
    /// Train a model and write a checkpoint.
    Train(commands::train::TrainArgs),
    /// Score a trained checkpoint on the test split.
    Evaluate(commands::evaluate::EvalArgs),
    /// Trade the test split on a trained checkpoint's forecasts.
    Backtest(commands::evaluate::EvalArgs),
    /// Train several configurations and tabulate their test metrics.
    Compare(commands::compare::CompareArgs),
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) => 1,
        Error::Data(_) | Error::Io(_) | Error::DimensionMismatch(_) => 2,
        Error::Numerical(_) => 3,
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };

    let result = match &cli.command {
        Command::Gradcheck(args) => commands::gradcheck::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
        Command::Backtest(args) => commands::backtest::run(args),
        Command::Compare(args) => commands::compare::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
