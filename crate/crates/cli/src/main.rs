use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hsi_acs::fusion::Penalty;
use hsi_acs_cli::{
    cmd_evaluate, cmd_phantom, cmd_reconstruct, cmd_simulate, cmd_sweep, CliError, Overrides, RunConfig,
};

/// Adaptive compressive sampling and subspace-fusion reconstruction of
/// hyperspectral images.
#[derive(Parser)]
#[command(name = "hsi-acs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labelled cube
    Phantom,
    /// Run the adaptive acquisition on a ground-truth cube
    Simulate,
    /// Fuse point spectra and band images into a full cube
    Reconstruct,
    /// Score a reconstruction against the reference; appends to report.csv
    Evaluate,
    /// Acquire once, then reconstruct and score after every iteration
    Sweep,
}

#[derive(Args)]
struct Flags {
    /// JSON run configuration; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// maximum number of band images
    #[arg(long, global = true)]
    bands: Option<usize>,
    /// superpixels requested per iteration, e.g. 20,40,80
    #[arg(long, global = true, value_delimiter = ',')]
    schedule: Option<Vec<usize>>,
    /// l1 or nuclear
    #[arg(long, global = true)]
    penalty: Option<Penalty>,
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// score reconstructions with the SVM classifier
    #[arg(long, global = true, overrides_with = "no_svm")]
    svm: bool,
    #[arg(long = "no-svm", global = true, overrides_with = "svm")]
    no_svm: bool,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            bands: self.bands,
            schedule: self.schedule.clone(),
            penalty: self.penalty,
            eta: self.eta,
            svm: match (self.svm, self.no_svm) {
                (true, _) => Some(true),
                (_, true) => Some(false),
                _ => None,
            },
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = RunConfig::load(cli.flags.config.as_deref(), &cli.flags.overrides())?;
    match cli.command {
        Command::Phantom => cmd_phantom(&config).map(drop),
        Command::Simulate => cmd_simulate(&config).map(drop),
        Command::Reconstruct => cmd_reconstruct(&config).map(drop),
        Command::Evaluate => cmd_evaluate(&config).map(drop),
        Command::Sweep => cmd_sweep(&config).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
