use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use convac_lab::config::{Command, ExperimentConfig, Overrides};
use convac_lab::error::LabResult;

#[derive(Parser)]
#[command(name = "convac-lab", version, about = "Entropy and scaling-law experiments on ConvAC models")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a seeded (or loaded) model as JSON.
    GenModel(Flags),
    /// H(X), the leaf conditional entropy sum and the per-layer chain.
    Entropy(Flags),
    /// Per-mapping gaps and both scaling bounds for one model.
    VerifyLaw(Flags),
    /// Differential entropy under sigmoid and relu for a set of densities.
    Activation(Flags),
    /// Scaling bounds over a seeded ensemble, with violation rates.
    Ensemble(Flags),
}

#[derive(clap::Args)]
struct Flags {
    /// TOML or JSON config, or a previous run's manifest.json.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Exit with status 4 when an ensemble detects a bound violation.
    #[arg(long)]
    strict: bool,
}

fn execute(command: Command, flags: Flags) -> LabResult<()> {
    let mut cfg = match &flags.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides {
        command: Some(command),
        seed: flags.seed,
        out: flags.out,
        strict: flags.strict,
    });
    let cfg = cfg.resolve()?;
    let out = cfg.out_dir();
    let manifest = convac_lab::run(&cfg)?;
    for o in &manifest.outputs {
        println!("{}  {}", o.sha256, out.join(&o.file).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Cmd::GenModel(f) => (Command::GenModel, f),
        Cmd::Entropy(f) => (Command::Entropy, f),
        Cmd::VerifyLaw(f) => (Command::VerifyLaw, f),
        Cmd::Activation(f) => (Command::Activation, f),
        Cmd::Ensemble(f) => (Command::Ensemble, f),
    };
    match execute(command, flags) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("convac-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
