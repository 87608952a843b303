use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use explab::config::{parse_config, ExperimentConfig, Operation, OutputSpec};
use explab::run::{report_path, run_to, RunError};
use explab_core::catalog::ExampleId;

#[derive(Parser)]
#[command(name = "explab", version, about = "Run separation, period and criterion experiments on planar flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON experiment config
    #[arg(long)]
    config: PathBuf,
    /// Report path; overrides `output.path`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random pairs; overrides `seed`
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Print every catalog example with a one-line description
    ListExamples,
    Simulate(RunArgs),
    SeparationSweep(RunArgs),
    SuspensionCheck(RunArgs),
    Series(RunArgs),
    Frechet(RunArgs),
    DenjoyKoksma(RunArgs),
    AnnulusPeriod(RunArgs),
    GreenCheck(RunArgs),
    RobustCriterion(RunArgs),
}

fn load(op: Operation, args: &RunArgs) -> Result<ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut config = parse_config(&text)?;
    if config.operation != op {
        return Err(RunError::Config(explab::ConfigError::new(
            "operation",
            format!("config asks for {} but the command is {op}", config.operation),
        )));
    }
    if let Some(seed) = args.seed {
        config.seed = Some(seed);
    }
    if let Some(out) = &args.out {
        let output = config.output.get_or_insert_with(OutputSpec::default);
        output.path = Some(out.to_string_lossy().into_owned());
    }
    Ok(config)
}

fn run(op: Operation, args: &RunArgs) -> Result<i32, RunError> {
    let config = load(op, args)?;
    let path = report_path(&config);
    let report = run_to(&config, &path)?;
    println!("{}", report.summary);
    if let Some(failure) = &report.failure {
        eprintln!("explab: {failure} (partial report in {})", path.display());
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (op, args) = match &cli.command {
        Command::ListExamples => {
            for id in ExampleId::ALL {
                println!("{:<20} {}", id.name(), id.anchor());
            }
            return ExitCode::SUCCESS;
        }
        Command::Simulate(a) => (Operation::Simulate, a),
        Command::SeparationSweep(a) => (Operation::SeparationSweep, a),
        Command::SuspensionCheck(a) => (Operation::SuspensionCheck, a),
        Command::Series(a) => (Operation::Series, a),
        Command::Frechet(a) => (Operation::Frechet, a),
        Command::DenjoyKoksma(a) => (Operation::DenjoyKoksma, a),
        Command::AnnulusPeriod(a) => (Operation::AnnulusPeriod, a),
        Command::GreenCheck(a) => (Operation::GreenCheck, a),
        Command::RobustCriterion(a) => (Operation::RobustCriterion, a),
    };
    match run(op, args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("explab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
