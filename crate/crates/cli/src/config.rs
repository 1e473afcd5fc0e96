//! Run configuration: a TOML document layered over built-in defaults, then `--set` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};
use vrbqn_core::env::EnvConfig;
use vrbqn_core::trainer::TrainConfig;
use vrbqn_core::LayerSpec;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const OUT_DIR_ENV: &str = "VRBQN_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "vrbqn-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub env: EnvConfig,
    pub layer: LayerConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub analysis: AnalysisConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub seed: u64,
    pub neurons: usize,
    pub sigma_xy: (f64, f64),
    pub sigma_z: f64,
    /// Load this layer instead of sampling one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for LayerConfig {
    fn default() -> Self {
        let desk = LayerSpec::desk();
        Self {
            seed: 0,
            neurons: desk.neurons,
            sigma_xy: desk.sigma_xy,
            sigma_z: desk.sigma_z,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub jobs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            episodes: 100,
            seeds: vec![0],
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub states: usize,
    pub threshold: f64,
    pub seed: u64,
    pub samples: usize,
    pub bins: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            states: vrbqn_core::analysis::DEFAULT_CALIBRATION_STATES,
            threshold: vrbqn_core::analysis::DEFAULT_THRESHOLD,
            seed: 0,
            samples: 5000,
            bins: 20,
        }
    }
}

impl RunConfig {
    pub fn layer_spec(&self) -> LayerSpec {
        LayerSpec {
            neurons: self.layer.neurons,
            width: self.env.width,
            height: self.env.height,
            channels: self.env.channels,
            sigma_xy: self.layer.sigma_xy,
            sigma_z: self.layer.sigma_z,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} unsupported, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        self.env.validate()?;
        self.train.validate()?;
        if self.layer.path.is_none() {
            self.layer_spec().validate()?;
        }
        if self.eval.episodes == 0 || self.eval.seeds.is_empty() || self.eval.jobs == 0 {
            return Err(CliError::Config(
                "eval needs positive episodes, jobs and at least one seed".into(),
            ));
        }
        if self.analysis.states == 0 || self.analysis.bins == 0 {
            return Err(CliError::Config(
                "analysis.states and analysis.bins must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Resolved output directory: flag, then environment, then config, then `vrbqn-out`.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(p);
        }
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string_pretty(self).map_err(|e| CliError::Runtime(format!("config snapshot: {e}")))
    }
}

fn defaults() -> Table {
    let mut t = Table::new();
    let section = |v: Result<Value, toml::ser::Error>| v.expect("defaults serialize");
    t.insert(
        "layer".into(),
        section(Value::try_from(LayerConfig::default())),
    );
    t.insert(
        "train".into(),
        section(Value::try_from(TrainConfig::vrbqn())),
    );
    t.insert(
        "eval".into(),
        section(Value::try_from(EvalConfig::default())),
    );
    t.insert(
        "analysis".into(),
        section(Value::try_from(AnalysisConfig::default())),
    );
    t
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses `value` as a TOML literal, falling back to a bare string.
fn literal(value: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()))
}

/// Applies one `dotted.key=value` override.
pub fn apply_override(doc: &mut Table, assignment: &str) -> CliResult<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key {key:?}")));
    }
    let (last, path) = parts.split_last().expect("non-empty split");
    let mut table = doc;
    for p in path {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override key {key:?}: {p} is not a table")))?;
    }
    table.insert(last.to_string(), literal(value.trim()));
    Ok(())
}

pub fn parse_config(text: &str, overrides: &[String]) -> CliResult<RunConfig> {
    let user: Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let mut doc = defaults();
    merge(&mut doc, user);
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let config: RunConfig = Value::Table(doc)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Reads a config file; a relative `layer.path` is resolved against the file's directory.
pub fn load_config(path: &Path, overrides: &[String]) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config = parse_config(&text, overrides).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    if let (Some(p), Some(dir)) = (config.layer.path.as_mut(), path.parent()) {
        if p.is_relative() {
            *p = dir.join(&*p);
        }
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use vrbqn_core::env::ScenarioKind;

    const MINIMAL: &str = "schema_version = 1\n[env]\nscenario = \"shooter\"\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL, &[]).unwrap();
        assert_eq!(c.env.scenario, ScenarioKind::Shooter);
        assert_eq!(c.layer, LayerConfig::default());
        assert_eq!(c.train, TrainConfig::vrbqn());
        assert_eq!(c.analysis.states, 1000);
    }

    #[test]
    fn partial_section_keeps_other_defaults() {
        let text = format!("{MINIMAL}[train]\ntotal_steps = 0\n");
        let c = parse_config(&text, &[]).unwrap();
        assert_eq!(c.train.total_steps, 0);
        assert_eq!(c.train.batch_size, 256);
    }

    #[test]
    fn overrides_apply_typed_values() {
        let c = parse_config(
            MINIMAL,
            &[
                "train.gamma=0.9".into(),
                "env.scenario=gather".into(),
                "layer.sigma_xy=[0.05, 0.1]".into(),
                "train.target_update_period=10".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.train.gamma, 0.9);
        assert_eq!(c.env.scenario, ScenarioKind::Gather);
        assert_eq!(c.layer.sigma_xy, (0.05, 0.1));
        assert_eq!(c.train.target_update_period, Some(10));
    }

    #[test]
    fn rejects_unknown_fields_and_bad_ranges() {
        let e = parse_config(&format!("{MINIMAL}[train]\nlearning_rat = 1.0\n"), &[]).unwrap_err();
        assert!(e.to_string().contains("learning_rat"), "{e}");
        let e = parse_config(MINIMAL, &["layer.sigma_xy=[0.2, 0.02]".into()]).unwrap_err();
        assert!(e.to_string().contains("sigma_xy"), "{e}");
        assert!(parse_config("schema_version = 2\n[env]\nscenario = \"gather\"\n", &[]).is_err());
        assert!(parse_config(MINIMAL, &["novalue".into()]).is_err());
    }

    #[test]
    fn snapshot_round_trips() {
        let mut c = parse_config(MINIMAL, &["train.target_update_period=5".into()]).unwrap();
        c.layer.path = Some("layer.bin".into());
        let back = parse_config(&c.to_toml().unwrap(), &[]).unwrap();
        assert_eq!(back, c);
    }
}
