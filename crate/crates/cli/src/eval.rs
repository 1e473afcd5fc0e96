use std::path::PathBuf;

use vrbqn_core::analysis::{prune_to_active, NeuronClassification};
use vrbqn_core::trainer::{evaluate, Policy};

use crate::error::{CliError, CliResult};
use crate::io::{load_head, load_layer, prepare_out_dir, require_config, write_file};
use crate::{Common, PolicyArg};

pub struct EvalArgs {
    pub checkpoint: Option<PathBuf>,
    pub layer: Option<PathBuf>,
    pub episodes: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub only_active: Option<PathBuf>,
    pub threshold: Option<f64>,
    pub jobs: Option<usize>,
    pub policy: PolicyArg,
}

pub fn run(common: &Common, args: EvalArgs) -> CliResult<()> {
    let config = require_config(common)?;
    let layer_path = args
        .layer
        .as_deref()
        .or(config.layer.path.as_deref())
        .ok_or_else(|| CliError::Config("--layer is required".into()))?;
    let mut layer = load_layer(layer_path)?;
    let mut head = match (args.policy, &args.checkpoint) {
        (PolicyArg::Greedy, Some(p)) => Some(load_head(p)?),
        (PolicyArg::Greedy, None) => {
            return Err(CliError::Config(
                "greedy evaluation needs --checkpoint".into(),
            ))
        }
        (PolicyArg::Random, _) => None,
    };
    let mut report_name = "eval.csv";
    if let Some(path) = &args.only_active {
        let h = head
            .as_ref()
            .ok_or_else(|| CliError::Config("--only-active needs a greedy checkpoint".into()))?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let threshold = args.threshold.unwrap_or(config.analysis.threshold);
        let classification = NeuronClassification::read_csv(&text, threshold)?;
        let (l, h) = prune_to_active(&layer, h, &classification)?;
        eprintln!(
            "pruned to {} of {} neurons",
            classification.active.len(),
            classification.n_neurons()
        );
        layer = l;
        head = Some(h);
        report_name = "eval_only_active.csv";
    }
    let policy = match &head {
        Some(h) => Policy::Greedy(h),
        None => Policy::Random,
    };
    let episodes = args.episodes.unwrap_or(config.eval.episodes);
    let seeds = args.seeds.unwrap_or_else(|| config.eval.seeds.clone());
    let jobs = args.jobs.unwrap_or(config.eval.jobs);
    let report = evaluate(&config.env, &layer, policy, episodes, &seeds, jobs)?;
    let out = prepare_out_dir(&config, common)?;
    let path = write_file(&out, report_name, |w| report.write_csv(w))?;
    println!(
        "{} episodes: return {:.3} +- {:.3}, alive ticks {:.1}",
        report.episodes, report.mean_return, report.std_return, report.mean_alive_ticks
    );
    println!("wrote {}", path.display());
    Ok(())
}
