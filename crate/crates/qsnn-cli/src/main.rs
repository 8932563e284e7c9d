//! Experiment harness for stochastic quantum perceptron networks.

mod config;
mod data;
mod runs;

use std::path::PathBuf;

use anyhow::bail;
use clap::{Parser, Subcommand};

use config::{BackendConfig, BackendName, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "qsnn",
    about = "Train, evaluate, and sample stochastic quantum perceptron networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Replace the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config's `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Backend override: statevector | exact-sampler | shots:<n>.
    #[arg(long)]
    backend: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train over the configured seeds and write models, traces, metrics.
    Train(CommonArgs),
    /// Evaluate a saved model on the configured dataset.
    Eval {
        /// Model file produced by `train`.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train or load a Hopfield model and emit recall trajectories.
    Hopfield(CommonArgs),
    /// Run the generative sampler on a frozen model.
    Grover(CommonArgs),
    /// Dataset preprocessing only: write encoded splits.
    Encode(CommonArgs),
}

fn parse_backend(text: &str) -> anyhow::Result<BackendConfig> {
    match text {
        "statevector" => Ok(BackendConfig::Name(BackendName::Statevector)),
        "exact-sampler" | "exact" => Ok(BackendConfig::Name(BackendName::ExactSampler)),
        other => {
            if let Some(n) = other.strip_prefix("shots:") {
                let shots: u32 = n.parse()?;
                if shots == 0 {
                    bail!("shot count must be at least 1");
                }
                Ok(BackendConfig::Shots { shots })
            } else {
                bail!("unknown backend {other:?}; use statevector, exact-sampler, or shots:<n>")
            }
        }
    }
}

fn load_with_overrides(args: &CommonArgs) -> anyhow::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seeds = vec![seed];
    }
    if let Some(backend) = &args.backend {
        config.backend = parse_backend(backend)?;
    }
    config.validate()?;
    Ok(config)
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Train(args) => {
            let config = load_with_overrides(args)?;
            runs::run_train(&config, args.out.as_deref())
        }
        Command::Eval { model, common } => {
            let config = load_with_overrides(common)?;
            runs::run_eval(model, &config, common.out.as_deref())
        }
        Command::Hopfield(args) => {
            let config = load_with_overrides(args)?;
            runs::run_hopfield(&config, args.out.as_deref())
        }
        Command::Grover(args) => {
            let config = load_with_overrides(args)?;
            runs::run_grover(&config, args.out.as_deref())
        }
        Command::Encode(args) => {
            let config = load_with_overrides(args)?;
            runs::run_encode(&config, args.out.as_deref())
        }
    }
}
