use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uip::commands::{self, TrainArgs};
use uip::{CliError, CliResult, RunConfig};

#[derive(Parser)]
#[command(name = "uip", version, about = "Simulated IMU + UWB motion capture pipeline")]
struct Cli {
    /// JSON run configuration; defaults apply to absent keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate motion clips, IMU streams and UWB ranging.
    Synth {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibrate ranges and run the attitude and distance filters.
    Filter {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the pose network.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        filtered: PathBuf,
        /// Ablation: train without the distance branch input.
        #[arg(long)]
        no_distances: bool,
        #[arg(long, requires = "val_filtered")]
        val_data: Option<PathBuf>,
        #[arg(long, requires = "val_data")]
        val_filtered: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a trained network on a dataset.
    Eval {
        /// Output directory of `uip train`.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        filtered: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate one or more eval directories.
    Report {
        #[arg(long = "eval", required = true, num_args = 1..)]
        evals: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(cfg: &RunConfig, out: Option<PathBuf>, stage: &str) -> CliResult<PathBuf> {
    match (out, &cfg.output_dir) {
        (Some(p), _) => Ok(p),
        (None, Some(base)) => Ok(base.join(stage)),
        (None, None) => Err(CliError::Config(format!("`{stage}` needs --out or `output_dir` in the config"))),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match cli.command {
        Command::Synth { out } => commands::synth(&cfg, &out_dir(&cfg, out, "synth")?),
        Command::Filter { data, out } => commands::filter(&cfg, &data, &out_dir(&cfg, out, "filter")?),
        Command::Train { data, filtered, no_distances, val_data, val_filtered, out } => {
            let out = out_dir(&cfg, out, "train")?;
            let val = val_data.as_deref().zip(val_filtered.as_deref());
            commands::train(&cfg, &TrainArgs { data: &data, filtered: &filtered, val, no_distances, out: &out })
        }
        Command::Eval { checkpoint, data, filtered, out } => {
            commands::eval(&cfg, &checkpoint, &data, &filtered, &out_dir(&cfg, out, "eval")?)
        }
        Command::Report { evals, out } => commands::report(&evals, &out_dir(&cfg, out, "report")?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("uip: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
