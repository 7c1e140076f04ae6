use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oscchain_harness::{run_experiment, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "oscchain", version, about = "Oscillator-chain experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run whatever experiment the config names.
    Run(Opts),
    SymplecticSuite(Opts),
    PropagatorOracle(Opts),
    BesselAccuracy(Opts),
    MomentOracle(Opts),
    DecoherenceScan(Opts),
    Thermalization(Opts),
    HydroFixedPoint(Opts),
    HydroCompare(Opts),
    ConservationCheck(Opts),
}

#[derive(Args)]
struct Opts {
    /// Experiment config (TOML, or JSON with a .json extension).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides output_dir from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Only report errors; the exit code still carries the verdict.
    #[arg(long)]
    quiet: bool,
}

fn split(cmd: Command) -> (Option<&'static str>, Opts) {
    match cmd {
        Command::Run(o) => (None, o),
        Command::SymplecticSuite(o) => (Some("symplectic-suite"), o),
        Command::PropagatorOracle(o) => (Some("propagator-oracle"), o),
        Command::BesselAccuracy(o) => (Some("bessel-accuracy"), o),
        Command::MomentOracle(o) => (Some("moment-oracle"), o),
        Command::DecoherenceScan(o) => (Some("decoherence-scan"), o),
        Command::Thermalization(o) => (Some("thermalization"), o),
        Command::HydroFixedPoint(o) => (Some("hydro-fixed-point"), o),
        Command::HydroCompare(o) => (Some("hydro-compare"), o),
        Command::ConservationCheck(o) => (Some("conservation-check"), o),
    }
}

fn execute(expected: Option<&str>, opts: &Opts) -> Result<bool, HarnessError> {
    let mut config = ExperimentConfig::load(&opts.config)?;
    let name = config.experiment.name();
    if let Some(e) = expected {
        if e != name {
            return Err(HarnessError::Config(format!(
                "subcommand {e} given a {name} config"
            )));
        }
    }
    if let Some(s) = opts.seed {
        config.seed = s;
    }
    let out = opts.out.clone().or_else(|| config.output_dir.clone());
    let run = run_experiment(&config, out.as_deref())?;
    if !opts.quiet {
        print!("{name}\n{}", run.outcome.summary());
        for (k, v) in &run.outcome.derived {
            println!("  {k} = {v:e}");
        }
        if let Some(dir) = &out {
            println!("outputs in {}", dir.display());
        }
    }
    Ok(run.outcome.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (expected, opts) = split(cli.command);
    match execute(expected, &opts) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
