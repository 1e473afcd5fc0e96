//! Interaction loop: act, step, store features, one optimizer update per decision.

use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{make_env, EnvConfig, Environment};
use crate::error::{Error, Result};
use crate::qlearn::{AdamConfig, QHead};
use crate::rbf::{FeatureVector, RbfLayer, State};
use crate::replay::{ReplayBuffer, Transition, DEFAULT_CAPACITY};

/// Linear epsilon decay from `start` to `end` over `decay_steps`, beginning at `decay_start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_start: u64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    pub const GREEDY: EpsilonSchedule = EpsilonSchedule {
        start: 0.0,
        end: 0.0,
        decay_start: 0,
        decay_steps: 0,
    };

    pub fn value(&self, step: u64) -> f64 {
        if step < self.decay_start {
            return self.start;
        }
        let t = step - self.decay_start;
        if self.decay_steps == 0 || t >= self.decay_steps {
            return self.end;
        }
        let frac = t as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self::GREEDY
    }
}

fn default_gamma() -> f64 {
    0.99
}
fn default_capacity() -> usize {
    DEFAULT_CAPACITY
}
fn default_eval_episodes() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub total_steps: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub epsilon: EpsilonSchedule,
    /// Refresh period of a frozen bootstrap head, in optimizer updates. Absent: bootstrap from the live head.
    #[serde(default)]
    pub target_update_period: Option<u64>,
    #[serde(default = "default_capacity")]
    pub replay_capacity: usize,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub seeds: Vec<u64>,
}

impl TrainConfig {
    /// Greedy, no target network, lr 0.01, batch 256, 100k steps.
    pub fn vrbqn() -> Self {
        Self {
            total_steps: 100_000,
            batch_size: 256,
            learning_rate: 0.01,
            gamma: default_gamma(),
            epsilon: EpsilonSchedule::GREEDY,
            target_update_period: None,
            replay_capacity: DEFAULT_CAPACITY,
            eval_episodes: default_eval_episodes(),
            seeds: vec![0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.replay_capacity == 0 {
            return Err(Error::Config("replay_capacity must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0,1]", self.gamma)));
        }
        for e in [self.epsilon.start, self.epsilon.end] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::Config(format!("epsilon {e} outside [0,1]")));
            }
        }
        if self.target_update_period == Some(0) {
            return Err(Error::Config(
                "target_update_period must be positive".into(),
            ));
        }
        AdamConfig::with_learning_rate(self.learning_rate).validate()
    }
}

/// One finished training episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    /// Cumulative agent decisions at the end of the episode.
    pub step: u64,
    pub episode: u64,
    pub ret: f64,
    /// Mean loss over the episode's updates, NaN when none ran.
    pub loss: f64,
    pub epsilon: f64,
    pub alive_ticks: u32,
}

pub fn write_train_log<W: Write>(rows: &[EpisodeLog], mut w: W) -> Result<W> {
    writeln!(w, "step,episode,return,loss,epsilon,alive_ticks")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.step, r.episode, r.ret, r.loss, r.epsilon, r.alive_ticks
        )?;
    }
    w.flush()?;
    Ok(w)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub head: QHead,
    pub log: Vec<EpisodeLog>,
    pub updates: u64,
}

impl TrainOutcome {
    /// Mean return of the episodes that ended within the last `window` decisions.
    pub fn final_window_mean(&self, total_steps: u64, window: u64) -> Option<f64> {
        let from = total_steps.saturating_sub(window);
        let rets: Vec<f64> = self
            .log
            .iter()
            .filter(|r| r.step > from)
            .map(|r| r.ret)
            .collect();
        (!rets.is_empty()).then(|| rets.iter().sum::<f64>() / rets.len() as f64)
    }
}

/// Per-frame activation cache so each rendered frame is activated once.
pub struct FeatureStack {
    slots: VecDeque<Vec<f64>>,
}

impl FeatureStack {
    pub fn new(layer: &RbfLayer, state: &State) -> Result<Self> {
        let slots = state
            .frames()
            .iter()
            .map(|f| layer.activate(f))
            .collect::<Result<_>>()?;
        Ok(Self { slots })
    }

    /// Shifts in the newest frame of `state`.
    pub fn advance(&mut self, layer: &RbfLayer, state: &State) -> Result<()> {
        let fresh = layer.activate(state.newest())?;
        self.slots.pop_front();
        self.slots.push_back(fresh);
        Ok(())
    }

    pub fn features(&self) -> FeatureVector {
        FeatureVector::new(self.slots.iter().flatten().copied().collect())
    }
}

/// Independent generator streams derived from one seed.
pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

const AGENT_STREAM: u64 = 1;
const EPISODE_STREAM: u64 = 2;
const EVAL_EPISODE_STREAM: u64 = 3;
const EVAL_POLICY_STREAM: u64 = 4;

fn check_geometry(env: &dyn Environment, layer: &RbfLayer) -> Result<()> {
    let c = env.config();
    if (c.width, c.height, c.channels) != (layer.width(), layer.height(), layer.channels()) {
        return Err(Error::Config(format!(
            "layer geometry {}x{}x{} does not match environment {}x{}x{}",
            layer.width(),
            layer.height(),
            layer.channels(),
            c.width,
            c.height,
            c.channels
        )));
    }
    Ok(())
}

pub fn weight_init(n_actions: usize, n_features: usize, learning_rate: f64) -> Result<QHead> {
    QHead::zeros(
        n_actions,
        n_features,
        AdamConfig::with_learning_rate(learning_rate),
    )
}

pub fn train(
    env: &mut dyn Environment,
    layer: &RbfLayer,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    train_observed(env, layer, config, seed, |_, _| {})
}

/// [`train`] that also reports every stored transition with the raw states behind it.
pub fn train_observed<F>(
    env: &mut dyn Environment,
    layer: &RbfLayer,
    config: &TrainConfig,
    seed: u64,
    mut observe: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&Transition, (&State, &State)),
{
    config.validate()?;
    check_geometry(env, layer)?;
    let k = env.config().stack;
    let mut head = weight_init(env.n_actions(), layer.feature_len(k), config.learning_rate)?;
    let mut log = Vec::new();
    if config.total_steps == 0 {
        return Ok(TrainOutcome {
            head,
            log,
            updates: 0,
        });
    }

    let mut agent_rng = stream(seed, AGENT_STREAM);
    let mut episode_rng = stream(seed, EPISODE_STREAM);
    let mut buffer = ReplayBuffer::new(config.replay_capacity)?;
    let mut frozen: Option<QHead> = None;
    let mut updates = 0u64;

    let mut state = env.reset(episode_rng.random())?;
    let mut stack = FeatureStack::new(layer, &state)?;
    let mut features = stack.features();
    let mut episode = 0u64;
    let (mut ep_return, mut ep_loss, mut ep_updates) = (0.0, 0.0, 0u64);

    for step in 0..config.total_steps {
        let epsilon = config.epsilon.value(step);
        let action = head.greedy_action(&features, Some(&mut agent_rng), epsilon)?;
        let out = env.step(action)?;
        stack.advance(layer, &out.state)?;
        let next_features = stack.features();
        let transition = Transition {
            features: features.clone(),
            action,
            reward: out.reward,
            next_features: next_features.clone(),
            terminal: out.terminal,
        };
        observe(&transition, (&state, &out.state));
        buffer.push(transition)?;
        ep_return += out.reward;

        if buffer.len() >= config.batch_size {
            if let Some(period) = config.target_update_period {
                if updates.is_multiple_of(period) {
                    frozen = Some(head.clone());
                }
            }
            let batch = buffer.sample_uniform(config.batch_size, &mut agent_rng)?;
            let (loss, grad) =
                head.loss_and_gradient(&batch, frozen.as_ref().unwrap_or(&head), config.gamma)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "loss diverged at step {}",
                    step + 1
                )));
            }
            head.adam_step(&grad)?;
            updates += 1;
            ep_loss += loss;
            ep_updates += 1;
        }

        if out.terminal {
            log.push(EpisodeLog {
                step: step + 1,
                episode,
                ret: ep_return,
                loss: if ep_updates > 0 {
                    ep_loss / ep_updates as f64
                } else {
                    f64::NAN
                },
                epsilon,
                alive_ticks: env.ticks(),
            });
            episode += 1;
            ep_return = 0.0;
            ep_loss = 0.0;
            ep_updates = 0;
            state = env.reset(episode_rng.random())?;
            stack = FeatureStack::new(layer, &state)?;
            features = stack.features();
        } else {
            state = out.state;
            features = next_features;
        }
    }
    Ok(TrainOutcome { head, log, updates })
}

#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    /// Argmax of the head, lowest index on ties.
    Greedy(&'a QHead),
    /// Uniform over actions.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub seed: u64,
    pub episodes: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_alive_ticks: f64,
    pub returns: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_seed: Vec<SeedSummary>,
    /// Pooled over every episode of every seed.
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_alive_ticks: f64,
    pub episodes: usize,
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl EvalReport {
    fn from_seeds(per_seed: Vec<SeedSummary>) -> Self {
        let all: Vec<f64> = per_seed
            .iter()
            .flat_map(|s| s.returns.iter().copied())
            .collect();
        let (mean_return, std_return) = mean_std(&all);
        let episodes = all.len();
        let alive: f64 = per_seed
            .iter()
            .map(|s| s.mean_alive_ticks * s.episodes as f64)
            .sum::<f64>();
        Self {
            per_seed,
            mean_return,
            std_return,
            mean_alive_ticks: alive / episodes.max(1) as f64,
            episodes,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<W> {
        writeln!(w, "seed,episodes,mean_return,std_return,mean_alive_ticks")?;
        for s in &self.per_seed {
            writeln!(
                w,
                "{},{},{},{},{}",
                s.seed, s.episodes, s.mean_return, s.std_return, s.mean_alive_ticks
            )?;
        }
        writeln!(
            w,
            "all,{},{},{},{}",
            self.episodes, self.mean_return, self.std_return, self.mean_alive_ticks
        )?;
        w.flush()?;
        Ok(w)
    }
}

/// Rolls out `policy` without learning, `episodes` per seed.
///
/// Seeds are split over `jobs` threads; the report order follows `seeds`.
pub fn evaluate(
    env_config: &EnvConfig,
    layer: &RbfLayer,
    policy: Policy<'_>,
    episodes: usize,
    seeds: &[u64],
    jobs: usize,
) -> Result<EvalReport> {
    if episodes == 0 || seeds.is_empty() {
        return Err(Error::Config("evaluation needs episodes and seeds".into()));
    }
    {
        let env = make_env(env_config)?;
        check_geometry(env.as_ref(), layer)?;
        if let Policy::Greedy(head) = policy {
            if head.n_actions() != env.n_actions()
                || head.n_features() != layer.feature_len(env_config.stack)
            {
                return Err(Error::Config(
                    "checkpoint dimensions do not match layer and environment".into(),
                ));
            }
        }
    }
    let jobs = jobs.clamp(1, seeds.len());
    let chunk = seeds.len().div_ceil(jobs);
    let per_seed: Vec<SeedSummary> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|&s| evaluate_seed(env_config, layer, policy, episodes, s))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation thread panicked"))
            .collect::<Result<Vec<_>>>()
    })?
    .into_iter()
    .flatten()
    .collect();
    Ok(EvalReport::from_seeds(per_seed))
}

fn evaluate_seed(
    env_config: &EnvConfig,
    layer: &RbfLayer,
    policy: Policy<'_>,
    episodes: usize,
    seed: u64,
) -> Result<SeedSummary> {
    let mut env = make_env(env_config)?;
    let mut episode_rng = stream(seed, EVAL_EPISODE_STREAM);
    let mut policy_rng = stream(seed, EVAL_POLICY_STREAM);
    let n_actions = env.n_actions();
    let mut returns = Vec::with_capacity(episodes);
    let mut alive = 0.0;
    for _ in 0..episodes {
        let state = env.reset(episode_rng.random())?;
        let mut stack = match policy {
            Policy::Greedy(_) => Some(FeatureStack::new(layer, &state)?),
            Policy::Random => None,
        };
        let mut ret = 0.0;
        loop {
            let action = match (policy, &stack) {
                (Policy::Greedy(head), Some(st)) => {
                    head.greedy_action::<ChaCha8Rng>(&st.features(), None, 0.0)?
                }
                _ => policy_rng.random_range(0..n_actions),
            };
            let out = env.step(action)?;
            ret += out.reward;
            if out.terminal {
                break;
            }
            if let Some(st) = stack.as_mut() {
                st.advance(layer, &out.state)?;
            }
        }
        returns.push(ret);
        alive += f64::from(env.ticks());
    }
    let (mean_return, std_return) = mean_std(&returns);
    Ok(SeedSummary {
        seed,
        episodes,
        mean_return,
        std_return,
        mean_alive_ticks: alive / episodes as f64,
        returns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ScenarioKind;
    use crate::rbf::{sample_layer, LayerSpec};

    #[test]
    fn epsilon_schedule() {
        let s = EpsilonSchedule {
            start: 1.0,
            end: 0.1,
            decay_start: 1000,
            decay_steps: 10_000,
        };
        assert_eq!(s.value(0), 1.0);
        assert_eq!(s.value(1000), 1.0);
        assert!((s.value(6000) - 0.55).abs() < 1e-12);
        assert_eq!(s.value(11_000), 0.1);
        assert_eq!(EpsilonSchedule::GREEDY.value(5), 0.0);
    }

    #[test]
    fn zero_steps_leaves_zero_head() {
        let cfg = EnvConfig::desk(ScenarioKind::Shooter);
        let mut env = make_env(&cfg).unwrap();
        let layer = sample_layer(1, &LayerSpec::desk()).unwrap();
        let mut tc = TrainConfig::vrbqn();
        tc.total_steps = 0;
        let out = train(env.as_mut(), &layer, &tc, 0).unwrap();
        assert!(out.log.is_empty());
        assert!(out.head.weights().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn geometry_mismatch_is_config_error() {
        let mut cfg = EnvConfig::desk(ScenarioKind::Gather);
        cfg.width = 16;
        let mut env = make_env(&cfg).unwrap();
        let layer = sample_layer(1, &LayerSpec::desk()).unwrap();
        let r = train(env.as_mut(), &layer, &TrainConfig::vrbqn(), 0);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn single_episode_has_zero_std() {
        let cfg = EnvConfig::desk(ScenarioKind::Shooter);
        let layer = sample_layer(1, &LayerSpec::desk()).unwrap();
        let head = weight_init(8, 512, 0.01).unwrap();
        let r = evaluate(&cfg, &layer, Policy::Greedy(&head), 1, &[4], 1).unwrap();
        assert_eq!(r.per_seed.len(), 1);
        assert_eq!(r.std_return, 0.0);
        // All-zero head: argmax ties resolve to action 0 (strafe right) until timeout.
        assert_eq!(r.mean_return, -300.0);
    }

    #[test]
    fn mean_std_population() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
    }
}
