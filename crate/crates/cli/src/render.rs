use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrbqn_core::env::{make_env, pnm, ScenarioKind, TrajectoryRow, TrajectoryWriter};
use vrbqn_core::trainer::FeatureStack;

use crate::error::{CliError, CliResult};
use crate::io::{load_head, load_layer, prepare_out_dir, require_config};
use crate::{Common, PolicyArg};

pub fn run(
    common: &Common,
    checkpoint: Option<PathBuf>,
    layer: Option<PathBuf>,
    seed: u64,
    policy: PolicyArg,
    max_steps: Option<u64>,
) -> CliResult<()> {
    let config = require_config(common)?;
    let greedy = match policy {
        PolicyArg::Greedy => {
            let ckpt = checkpoint
                .ok_or_else(|| CliError::Config("greedy rollout needs --checkpoint".into()))?;
            let layer_path = layer
                .or_else(|| config.layer.path.clone())
                .ok_or_else(|| CliError::Config("greedy rollout needs --layer".into()))?;
            Some((load_layer(&layer_path)?, load_head(&ckpt)?))
        }
        PolicyArg::Random => None,
    };
    let mut env = make_env(&config.env)?;
    if let Some((layer, head)) = &greedy {
        let k = config.env.stack;
        if layer.width() != config.env.width
            || layer.height() != config.env.height
            || layer.channels() != config.env.channels
            || head.n_features() != layer.feature_len(k)
            || head.n_actions() != env.n_actions()
        {
            return Err(CliError::Config(
                "checkpoint and layer do not match the environment".into(),
            ));
        }
    }
    let out = prepare_out_dir(&config, common)?;
    let frames_dir = out.join("frames");
    std::fs::create_dir_all(&frames_dir)?;
    let ext = if config.env.channels == 3 {
        "ppm"
    } else {
        "pgm"
    };
    let info = match config.env.scenario {
        ScenarioKind::Shooter => "bearing",
        ScenarioKind::Gather => "life",
    };
    let file = std::fs::File::create(out.join("trajectory.csv"))?;
    let mut log = TrajectoryWriter::new(std::io::BufWriter::new(file), info)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut state = env.reset(seed)?;
    pnm::save_pnm(
        state.newest(),
        frames_dir.join(format!("frame_00000.{ext}")),
    )?;
    let mut stack = match &greedy {
        Some((layer, _)) => Some(FeatureStack::new(layer, &state)?),
        None => None,
    };
    let (mut steps, mut total) = (0u64, 0.0);
    while max_steps.is_none_or(|m| steps < m) {
        let action = match (&greedy, &stack) {
            (Some((_, head)), Some(s)) => {
                head.greedy_action::<ChaCha8Rng>(&s.features(), None, 0.0)?
            }
            _ => rng.random_range(0..env.n_actions()),
        };
        let step = env.step(action)?;
        steps += 1;
        total += step.reward;
        state = step.state;
        pnm::save_pnm(
            state.newest(),
            frames_dir.join(format!("frame_{steps:05}.{ext}")),
        )?;
        log.write(&TrajectoryRow {
            episode: seed,
            tick: env.ticks(),
            action,
            reward: step.reward,
            terminal: step.terminal,
            info: env.info(),
        })?;
        if let (Some((layer, _)), Some(s)) = (&greedy, stack.as_mut()) {
            s.advance(layer, &state)?;
        }
        if step.terminal {
            break;
        }
    }
    log.finish()?;
    println!(
        "{steps} decisions, {} ticks, return {total}; frames in {}",
        env.ticks(),
        frames_dir.display()
    );
    Ok(())
}
