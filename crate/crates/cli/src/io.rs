use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use vrbqn_core::{QHead, RbfLayer};

use crate::config::{load_config, RunConfig};
use crate::error::{CliError, CliResult};
use crate::Common;

pub fn require_config(common: &Common) -> CliResult<RunConfig> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    load_config(path, &common.overrides)
}

pub fn prepare_out_dir(config: &RunConfig, common: &Common) -> CliResult<PathBuf> {
    let dir = config.output_dir(common.out.as_deref());
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn unreadable(path: &Path, e: vrbqn_core::Error) -> CliError {
    match e {
        vrbqn_core::Error::Io(io) => {
            CliError::Config(format!("cannot read {}: {io}", path.display()))
        }
        other => match CliError::from(other) {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            r => r,
        },
    }
}

pub fn load_layer(path: &Path) -> CliResult<RbfLayer> {
    RbfLayer::load(path).map_err(|e| unreadable(path, e))
}

pub fn load_head(path: &Path) -> CliResult<QHead> {
    QHead::load(path).map_err(|e| unreadable(path, e))
}

/// Creates `dir/name` and hands a buffered writer to `body`.
pub fn write_file<F>(dir: &Path, name: &str, body: F) -> CliResult<PathBuf>
where
    F: FnOnce(BufWriter<File>) -> vrbqn_core::Result<BufWriter<File>>,
{
    let path = dir.join(name);
    let file = File::create(&path)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))?;
    body(BufWriter::new(file))?;
    Ok(path)
}
