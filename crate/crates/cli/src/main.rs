mod analyze;
mod config;
mod error;
mod eval;
mod io;
mod render;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliResult;

#[derive(Parser)]
#[command(
    name = "vrbqn",
    version,
    about = "Random RBF features with a linear Q-head"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set train.gamma=0.9`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; beats VRBQN_OUT_DIR and the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample or load a layer, train one head per seed, write checkpoints and logs.
    Train {
        #[command(flatten)]
        common: Common,
        /// Re-run the config snapshot of an earlier manifest.
        #[arg(long, conflicts_with = "config")]
        replay: Option<PathBuf>,
    },
    /// Roll out a checkpoint (or the random policy) and write an evaluation CSV.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        layer: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Comma-separated evaluation seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Classification CSV; evaluates only the active neurons.
        #[arg(long)]
        only_active: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_enum, default_value_t = PolicyArg::Greedy)]
        policy: PolicyArg,
    },
    /// Neuron classification, activation differences or a single-neuron trace.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Analyze a saved layer instead of sampling one from the config.
        #[arg(long, conflicts_with = "layer_seeds")]
        layer: Option<PathBuf>,
        /// Classify this many layers with consecutive seeds starting at layer.seed.
        #[arg(long)]
        layer_seeds: Option<u64>,
        #[arg(long)]
        states: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Seed of the calibration or trace rollout.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        neuron: usize,
        #[arg(long)]
        samples: Option<usize>,
        /// Calibration state indices compared by diff.
        #[arg(long, value_name = "I,J", default_value = "0,1", value_parser = parse_pair)]
        pair: (usize, usize),
    },
    /// Dump the frames and trajectory of one episode.
    RenderEpisode {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        layer: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = PolicyArg::Greedy)]
        policy: PolicyArg,
        /// Stop after this many agent decisions even if the episode is still running.
        #[arg(long)]
        max_steps: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Greedy,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Classify,
    Diff,
    Trace,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected I,J")?;
    let idx = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((idx(a)?, idx(b)?))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train { common, replay } => train::run(&common, replay.as_deref()),
        Command::Eval {
            common,
            checkpoint,
            layer,
            episodes,
            seeds,
            only_active,
            threshold,
            jobs,
            policy,
        } => eval::run(
            &common,
            eval::EvalArgs {
                checkpoint,
                layer,
                episodes,
                seeds,
                only_active,
                threshold,
                jobs,
                policy,
            },
        ),
        Command::Analyze {
            common,
            mode,
            layer,
            layer_seeds,
            states,
            threshold,
            seed,
            neuron,
            samples,
            pair,
        } => analyze::run(
            &common,
            analyze::AnalyzeArgs {
                mode,
                layer,
                layer_seeds,
                states,
                threshold,
                seed,
                neuron,
                samples,
                pair,
            },
        ),
        Command::RenderEpisode {
            common,
            checkpoint,
            layer,
            seed,
            policy,
            max_steps,
        } => render::run(&common, checkpoint, layer, seed, policy, max_steps),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vrbqn: {e}");
            e.exit_code()
        }
    }
}
