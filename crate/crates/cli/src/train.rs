use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use vrbqn_core::env::make_env;
use vrbqn_core::trainer::{train, write_train_log};
use vrbqn_core::{sample_layer, RbfLayer};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{load_layer, prepare_out_dir, write_file};
use crate::Common;

pub const ARTIFACT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LAYER_FILE: &str = "layer.bin";

/// Everything needed to find and regenerate the artifacts of a train run.
///
/// Paths are relative to the directory holding the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: u32,
    pub tool_version: String,
    pub config: RunConfig,
    pub layer: PathBuf,
    pub checkpoints: Vec<PathBuf>,
    pub logs: Vec<PathBuf>,
    pub seeds: Vec<u64>,
    /// Set when the run stopped early; only the listed files exist.
    pub partial: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub started_unix_secs: u64,
    pub elapsed_secs: f64,
}

impl RunManifest {
    fn write(&self, dir: &Path) -> CliResult<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Runtime(format!("manifest: {e}")))?;
        std::fs::write(dir.join(MANIFEST_FILE), json + "\n")?;
        Ok(())
    }
}

fn read_manifest(path: &Path) -> CliResult<RunManifest> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn resolve_layer(config: &mut RunConfig) -> CliResult<RbfLayer> {
    match config.layer.path.as_mut() {
        Some(p) => {
            let layer = load_layer(p)?;
            if let Ok(abs) = p.canonicalize() {
                *p = abs;
            }
            Ok(layer)
        }
        None => Ok(sample_layer(config.layer.seed, &config.layer_spec())?),
    }
}

pub fn run(common: &Common, replay: Option<&Path>) -> CliResult<()> {
    let mut config = match replay {
        Some(path) => {
            if !common.overrides.is_empty() {
                return Err(CliError::Config(
                    "--set cannot be combined with --replay".into(),
                ));
            }
            let config = read_manifest(path)?.config;
            config.validate()?;
            config
        }
        None => crate::io::require_config(common)?,
    };
    if config.train.seeds.is_empty() {
        return Err(CliError::Config("train.seeds is empty".into()));
    }
    let started = Instant::now();
    let started_unix_secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let layer = resolve_layer(&mut config)?;
    let out = prepare_out_dir(&config, common)?;
    write_file(&out, LAYER_FILE, |w| layer.write_to(w))?;
    std::fs::write(out.join("config.toml"), config.to_toml()?)?;

    let mut manifest = RunManifest {
        artifact_version: ARTIFACT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        layer: LAYER_FILE.into(),
        checkpoints: Vec::new(),
        logs: Vec::new(),
        seeds: config.train.seeds.clone(),
        partial: false,
        error: None,
        started_unix_secs,
        elapsed_secs: 0.0,
    };
    for &seed in &config.train.seeds {
        let result = make_env(&config.env)
            .and_then(|mut env| train(env.as_mut(), &layer, &config.train, seed));
        let outcome = match result {
            Ok(o) => o,
            Err(e) => {
                let err = CliError::from(e);
                manifest.partial = true;
                manifest.error = Some(err.to_string());
                manifest.elapsed_secs = started.elapsed().as_secs_f64();
                manifest.write(&out)?;
                return Err(err);
            }
        };
        let ckpt = format!("checkpoint_seed{seed}.bin");
        let log = format!("train_log_seed{seed}.csv");
        write_file(&out, &ckpt, |w| outcome.head.write_to(w))?;
        write_file(&out, &log, |w| write_train_log(&outcome.log, w))?;
        manifest.checkpoints.push(ckpt.into());
        manifest.logs.push(log.into());
        let tail = outcome
            .final_window_mean(config.train.total_steps, 1000)
            .map(|m| format!("{m:.3}"))
            .unwrap_or_else(|| "n/a".into());
        println!(
            "seed {seed}: {} episodes, {} updates, final-window mean return {tail}",
            outcome.log.len(),
            outcome.updates
        );
    }
    manifest.elapsed_secs = started.elapsed().as_secs_f64();
    manifest.write(&out)?;
    println!("wrote {}", out.join(MANIFEST_FILE).display());
    Ok(())
}
