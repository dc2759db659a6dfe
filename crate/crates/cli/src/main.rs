use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use locobs_cli::scenario::MethodName;
use locobs_cli::{casestudy, commands, CliError, Options, Scenario};

#[derive(Parser)]
#[command(name = "locobs", version, about = "Observability and state reconstruction from local measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank analysis of the scenario (or a randomization sweep if some parameter is random)
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Simulated shot-noise records, one per seed
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Initial-state estimate from record files
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// record headers (`*.json`) written by `simulate`
        #[arg(required = true)]
        records: Vec<PathBuf>,
    },
    /// Bundled four-qubit chain studies: case1, case1-random, case2, case3
    Casestudy {
        name: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// scenario file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// accept an output map that does not cover every subsystem
    #[arg(long)]
    allow_partial_output: bool,
    #[arg(long, value_enum)]
    method: Option<MethodName>,
    /// shots per (instant, observable); 0 records exact expectations
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// rank tolerance for analyze, solver tolerance for reconstruct
    #[arg(long)]
    tolerance: Option<f64>,
}

impl Common {
    fn options(&self) -> Options {
        Options {
            seed: self.seed,
            out: self.out.clone(),
            allow_partial: self.allow_partial_output,
            method: self.method,
            shots: self.shots,
            trials: self.trials,
            tolerance: self.tolerance,
        }
    }

    fn scenario(&self) -> Result<Scenario, CliError> {
        let path = self.config.as_ref().ok_or_else(|| CliError::Usage("--config is required".into()))?;
        Scenario::load(path)
    }
}

fn run(cli: Cli) -> Result<commands::Outcome, CliError> {
    match cli.command {
        Command::Analyze { common } => commands::analyze(&common.scenario()?, &common.options()),
        Command::Simulate { common } => commands::simulate(&common.scenario()?, &common.options()),
        Command::Reconstruct { common, records } => {
            commands::reconstruct(&common.scenario()?, &records, &common.options())
        }
        Command::Casestudy { name, common } => casestudy::run(&name, &common.options()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{}", out.summary);
            ExitCode::from(out.exit as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
