//! `sawmatch`: inspect SAWSDL documents, rank services, run evaluations and
//! serve the registry API.

mod docs;
mod eval;
mod inspect;
mod rank;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Failure classes mapped to exit codes: usage and parse problems exit
/// with 2, everything else with 1.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

pub fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

pub type CliResult = Result<(), Failure>;

#[derive(Parser)]
#[command(
    name = "sawmatch",
    version,
    about = "Semantic matchmaking over SAWSDL service descriptions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    Text,
    Tsv,
}

#[derive(Subcommand)]
enum Command {
    /// Print the interfaces and operations of a service document together
    /// with the annotation and element-name sets extracted per side.
    Inspect {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Rank the services of a directory against requested concepts.
    Match(rank::MatchArgs),
    /// Evaluate configurations against relevance judgments and write CSV reports.
    Eval(eval::EvalArgs),
    /// Run the registry HTTP API.
    Serve(serve::ServeArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Inspect { file, format } => inspect::run(&file, format),
        Command::Match(args) => rank::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Serve(args) => serve::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
