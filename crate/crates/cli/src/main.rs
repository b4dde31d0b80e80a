use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pdfool_cli::{execute, replay, CliError, CliResult, ConfigFile};

/// PD, ICE and PFI explanations and the PD-plot attack.
#[derive(Parser)]
#[command(name = "pdfool", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Config file of `section.key = value` lines.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Extra `key=value` settings, applied after the file.
    #[arg(long = "set", short = 's')]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a correlated-Gaussian dataset.
    Simulate(RunArgs),
    /// Fit the original model on the whole dataset.
    Train(RunArgs),
    /// PD curves, ICE curves and permutation importance for a model.
    Explain(RunArgs),
    /// Build the attack fold by fold and report held-out results.
    Attack(RunArgs),
    /// Score a saved attack on new data.
    Evaluate(RunArgs),
    /// TPR and accuracy over a range of classifier thresholds.
    Sweep(RunArgs),
    /// Render curve CSVs as SVG.
    Plot(RunArgs),
    /// Re-run a command from its run.manifest and verify the outputs.
    Replay {
        manifest: PathBuf,
        /// Write into this directory instead of the recorded one.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load(args: &RunArgs) -> CliResult<ConfigFile> {
    let mut config = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    for s in &args.set {
        config.set(s)?;
    }
    // relative paths from the command line are taken from the working directory
    config.resolve_paths(&std::env::current_dir()?);
    Ok(config)
}

fn run(cli: Cli) -> CliResult<()> {
    let (name, args) = match &cli.command {
        Command::Simulate(a) => ("simulate", a),
        Command::Train(a) => ("train", a),
        Command::Explain(a) => ("explain", a),
        Command::Attack(a) => ("attack", a),
        Command::Evaluate(a) => ("evaluate", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Plot(a) => ("plot", a),
        Command::Replay { manifest, output } => {
            let text = std::fs::read_to_string(manifest)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", manifest.display())))?;
            let m = replay(&text, output.as_deref())?;
            println!("replayed `{}`: {} outputs identical", m.command, m.outputs.len());
            return Ok(());
        }
    };
    let m = execute(name, &load(args)?)?;
    println!("{name}: wrote {} files under {}", m.outputs.len() + 1, m.config.get("run.output").unwrap_or("."));
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
