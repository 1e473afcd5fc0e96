use std::io::Write;
use std::path::{Path, PathBuf};

use vrbqn_core::analysis::{
    activation_diff, classify_neurons, generate_calibration_states, neuron_trace, overlay_frame,
};
use vrbqn_core::env::{make_env, pnm};
use vrbqn_core::trainer::mean_std;
use vrbqn_core::{sample_layer, RbfLayer, State};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{load_layer, prepare_out_dir, require_config, write_file};
use crate::{Common, Mode};

pub struct AnalyzeArgs {
    pub mode: Mode,
    pub layer: Option<PathBuf>,
    pub layer_seeds: Option<u64>,
    pub states: Option<usize>,
    pub threshold: Option<f64>,
    pub seed: Option<u64>,
    pub neuron: usize,
    pub samples: Option<usize>,
    pub pair: (usize, usize),
}

fn single_layer(config: &RunConfig, path: Option<&Path>) -> CliResult<RbfLayer> {
    match path.or(config.layer.path.as_deref()) {
        Some(p) => load_layer(p),
        None => Ok(sample_layer(config.layer.seed, &config.layer_spec())?),
    }
}

fn calibration(config: &RunConfig, n: usize, seed: u64) -> CliResult<Vec<State>> {
    let mut env = make_env(&config.env)?;
    Ok(generate_calibration_states(env.as_mut(), n, seed)?)
}

pub fn run(common: &Common, args: AnalyzeArgs) -> CliResult<()> {
    let config = require_config(common)?;
    let threshold = args.threshold.unwrap_or(config.analysis.threshold);
    let seed = args.seed.unwrap_or(config.analysis.seed);
    let n_states = args.states.unwrap_or(config.analysis.states);
    if args.layer_seeds.is_some() && !matches!(args.mode, Mode::Classify) {
        return Err(CliError::Config(
            "--layer-seeds only applies to classify".into(),
        ));
    }
    let out = prepare_out_dir(&config, common)?;
    match args.mode {
        Mode::Classify => classify(&config, &args, &out, n_states, seed, threshold),
        Mode::Diff => {
            let layer = single_layer(&config, args.layer.as_deref())?;
            let (i, j) = args.pair;
            let need = i.max(j) + 1;
            let states = calibration(&config, n_states.max(need), seed)?;
            let classification = classify_neurons(&layer, &states, threshold)?;
            let diff = activation_diff(&layer, &states[i], &states[j], &classification)?;
            write_file(&out, "diff_histogram.csv", |w| {
                diff.write_histogram_csv(config.analysis.bins, w)
            })?;
            write_file(&out, "diff_neurons.csv", |w| diff.write_neurons_csv(w))?;
            let overlay = overlay_frame(&layer, &states[i], &states[j], &diff)?;
            let ext = if overlay.channels() == 3 {
                "ppm"
            } else {
                "pgm"
            };
            write_file(&out, &format!("diff_overlay.{ext}"), |w| {
                pnm::write_pnm(&overlay, w)
            })?;
            let moved = diff.delta.iter().filter(|d| **d > 0.0).count();
            println!(
                "states {i} and {j}: {moved} of {} neurons changed",
                diff.delta.len()
            );
            Ok(())
        }
        Mode::Trace => {
            let layer = single_layer(&config, args.layer.as_deref())?;
            let samples = args.samples.unwrap_or(config.analysis.samples);
            let mut env = make_env(&config.env)?;
            let trace = neuron_trace(&layer, env.as_mut(), samples, args.neuron, threshold, seed)?;
            let name = format!("trace_neuron{}.csv", args.neuron);
            let path = write_file(&out, &name, |w| trace.write_csv(w))?;
            println!(
                "neuron {}: {} of {} samples below {threshold}",
                args.neuron,
                trace.flagged(),
                trace.records.len()
            );
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn classify(
    config: &RunConfig,
    args: &AnalyzeArgs,
    out: &Path,
    n_states: usize,
    seed: u64,
    threshold: f64,
) -> CliResult<()> {
    let states = calibration(config, n_states, seed)?;
    let Some(n_layers) = args.layer_seeds else {
        let layer = single_layer(config, args.layer.as_deref())?;
        let c = classify_neurons(&layer, &states, threshold)?;
        write_file(out, "classification.csv", |w| c.write_csv(w))?;
        println!(
            "{} of {} neurons active ({:.4})",
            c.active.len(),
            c.n_neurons(),
            c.active_fraction()
        );
        return Ok(());
    };
    if n_layers == 0 {
        return Err(CliError::Config("--layer-seeds must be positive".into()));
    }
    let spec = config.layer_spec();
    let mut rows = Vec::new();
    for layer_seed in config.layer.seed..config.layer.seed + n_layers {
        let layer = sample_layer(layer_seed, &spec)?;
        let c = classify_neurons(&layer, &states, threshold)?;
        write_file(out, &format!("classification_seed{layer_seed}.csv"), |w| {
            c.write_csv(w)
        })?;
        rows.push((
            layer_seed,
            c.active.len(),
            c.n_neurons(),
            c.active_fraction(),
        ));
    }
    let fractions: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let (mean, std) = mean_std(&fractions);
    write_file(out, "classification_summary.csv", |mut w| {
        writeln!(w, "layer_seed,active,neurons,active_fraction")?;
        for (s, a, n, f) in &rows {
            writeln!(w, "{s},{a},{n},{f}")?;
        }
        writeln!(w, "mean,,,{mean}")?;
        writeln!(w, "std,,,{std}")?;
        w.flush()?;
        Ok(w)
    })?;
    println!("active fraction over {n_layers} layers: {mean:.4} +- {std:.4}");
    Ok(())
}
