//! Software-rendered first-person toy environments.
//!
//! Two scenarios share one room, one camera model and one stepping contract:
//! an agent decision is repeated for `skip_frames` simulator ticks, rewards
//! accumulate over those ticks, and the returned state stacks the newest
//! rendered frame on top of the previous ones.

mod camera;
mod gather;
pub mod pnm;
mod shooter;
mod trajectory;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rbf::{Frame, State};

pub use camera::wrap_angle;
pub use gather::{GatherAction, GatherSim, GatherState};
pub use shooter::{ShooterAction, ShooterSim, ShooterState};
pub use trajectory::{TrajectoryRow, TrajectoryWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Shoot a target placed on a line in front of a fixed spawn point.
    Shooter,
    /// Survive by walking over health packs.
    Gather,
}

impl ScenarioKind {
    pub fn n_actions(self) -> usize {
        match self {
            ScenarioKind::Shooter => ShooterAction::ALL.len(),
            ScenarioKind::Gather => GatherAction::ALL.len(),
        }
    }

    pub fn default_timeout(self) -> u32 {
        match self {
            ScenarioKind::Shooter => shooter::TIMEOUT_TICKS,
            ScenarioKind::Gather => gather::TIMEOUT_TICKS,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::Shooter => "shooter",
            ScenarioKind::Gather => "gather",
        })
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shooter" | "basic" => Ok(ScenarioKind::Shooter),
            "gather" | "health_gathering" => Ok(ScenarioKind::Gather),
            other => Err(Error::Config(format!("unknown scenario {other:?}"))),
        }
    }
}

fn default_skip() -> u32 {
    6
}
fn default_stack() -> usize {
    2
}
fn default_channels() -> usize {
    1
}
fn default_side() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub scenario: ScenarioKind,
    #[serde(default = "default_side")]
    pub width: usize,
    #[serde(default = "default_side")]
    pub height: usize,
    #[serde(default = "default_channels")]
    pub channels: usize,
    #[serde(default = "default_skip")]
    pub skip_frames: u32,
    #[serde(default = "default_stack")]
    pub stack: usize,
    /// Tick budget per episode; the scenario default when absent.
    #[serde(default)]
    pub timeout: Option<u32>,
    #[serde(default)]
    pub seed: u64,
}

impl EnvConfig {
    /// 32x32 gray, skip 6, two stacked frames.
    pub fn desk(scenario: ScenarioKind) -> Self {
        Self {
            scenario,
            width: 32,
            height: 32,
            channels: 1,
            skip_frames: 6,
            stack: 2,
            timeout: None,
            seed: 0,
        }
    }

    /// 120 rows x 160 columns.
    pub fn paper(scenario: ScenarioKind, channels: usize) -> Self {
        Self {
            width: 160,
            height: 120,
            channels,
            ..Self::desk(scenario)
        }
    }

    pub fn timeout_ticks(&self) -> u32 {
        self.timeout
            .unwrap_or_else(|| self.scenario.default_timeout())
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(Error::Config(format!(
                "frame size {}x{} below the 8x8 minimum",
                self.width, self.height
            )));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::Config(format!(
                "channels must be 1 or 3, got {}",
                self.channels
            )));
        }
        if self.skip_frames < 1 {
            return Err(Error::Config("skip_frames must be at least 1".into()));
        }
        if self.stack < 1 {
            return Err(Error::Config("stack must be at least 1".into()));
        }
        if self.timeout_ticks() < 1 {
            return Err(Error::Config("timeout must be at least one tick".into()));
        }
        Ok(())
    }
}

/// Ground-truth agent pose, for analysis overlays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Result of one agent decision.
#[derive(Debug, Clone)]
pub struct Step {
    pub state: State,
    pub reward: f64,
    pub terminal: bool,
    /// Ticks actually simulated (fewer than requested when the episode ended early).
    pub ticks: u32,
}

/// Per-tick scenario physics and drawing.
pub trait Simulation {
    fn n_actions(&self) -> usize;
    fn reset(&mut self, episode_seed: u64);
    /// Advances one tick and returns `(reward, episode_over)`, timeouts excluded.
    fn tick(&mut self, action: usize) -> (f64, bool);
    fn draw(&self, width: usize, height: usize, channels: usize) -> Frame;
    fn pose(&self) -> Pose;
    /// Life points for gather, signed bearing to the target for the shooter.
    fn info(&self) -> f64;
}

/// Object-safe interface over the scenarios.
pub trait Environment: Send {
    fn kind(&self) -> ScenarioKind;
    fn config(&self) -> &EnvConfig;
    fn n_actions(&self) -> usize;
    fn reset(&mut self, episode_seed: u64) -> Result<State>;
    /// Repeats `action` for `skip_frames` ticks.
    fn step(&mut self, action: usize) -> Result<Step>;
    /// Repeats `action` for exactly `ticks` ticks (zero is allowed and only re-renders).
    fn act(&mut self, action: usize, ticks: u32) -> Result<Step>;
    fn render(&self) -> Frame;
    fn pose(&self) -> Pose;
    fn info(&self) -> f64;
    /// Ticks elapsed in the current episode.
    fn ticks(&self) -> u32;
    fn is_terminal(&self) -> bool;
    fn state(&self) -> Option<&State>;
}

/// A scenario wrapped with frame skipping, stacking and timeouts.
pub struct PixelEnv<S: Simulation> {
    kind: ScenarioKind,
    config: EnvConfig,
    sim: S,
    state: Option<State>,
    ticks: u32,
    terminal: bool,
}

impl<S: Simulation> PixelEnv<S> {
    fn with_sim(kind: ScenarioKind, config: EnvConfig, sim: S) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            kind,
            config,
            sim,
            state: None,
            ticks: 0,
            terminal: false,
        })
    }

    pub fn sim(&self) -> &S {
        &self.sim
    }

    /// Direct access for tests and analysis that need to pose the agent.
    pub fn sim_mut(&mut self) -> &mut S {
        &mut self.sim
    }

    /// Re-renders after an external change to the simulation and restarts the frame stack.
    pub fn restack(&mut self) -> Result<State> {
        let frame = self
            .sim
            .draw(self.config.width, self.config.height, self.config.channels);
        let state = State::repeated(frame, self.config.stack)?;
        self.state = Some(state.clone());
        Ok(state)
    }
}

impl PixelEnv<ShooterSim> {
    pub fn shooter(config: EnvConfig) -> Result<Self> {
        Self::with_sim(ScenarioKind::Shooter, config, ShooterSim::new())
    }
}

impl PixelEnv<GatherSim> {
    pub fn gather(config: EnvConfig) -> Result<Self> {
        Self::with_sim(ScenarioKind::Gather, config, GatherSim::new())
    }
}

impl<S: Simulation + Send> Environment for PixelEnv<S> {
    fn kind(&self) -> ScenarioKind {
        self.kind
    }

    fn config(&self) -> &EnvConfig {
        &self.config
    }

    fn n_actions(&self) -> usize {
        self.sim.n_actions()
    }

    fn reset(&mut self, episode_seed: u64) -> Result<State> {
        self.sim
            .reset(episode_seed ^ self.config.seed.rotate_left(32));
        self.ticks = 0;
        self.terminal = false;
        self.restack()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        self.act(action, self.config.skip_frames)
    }

    fn act(&mut self, action: usize, ticks: u32) -> Result<Step> {
        let prev = match (&self.state, self.terminal) {
            (None, _) => return Err(Error::State("environment not reset".into())),
            (Some(_), true) => {
                return Err(Error::State("episode is over; call reset".into()));
            }
            (Some(s), false) => s.clone(),
        };
        if action >= self.sim.n_actions() {
            return Err(Error::Config(format!(
                "action {action} out of range for {} actions",
                self.sim.n_actions()
            )));
        }
        let timeout = self.config.timeout_ticks();
        let mut reward = 0.0;
        let mut done = 0;
        while done < ticks && !self.terminal {
            let (r, over) = self.sim.tick(action);
            reward += r;
            self.ticks += 1;
            done += 1;
            self.terminal = over || self.ticks >= timeout;
        }
        let state = prev.push_frame(self.render())?;
        self.state = Some(state.clone());
        Ok(Step {
            state,
            reward,
            terminal: self.terminal,
            ticks: done,
        })
    }

    fn render(&self) -> Frame {
        self.sim
            .draw(self.config.width, self.config.height, self.config.channels)
    }

    fn pose(&self) -> Pose {
        self.sim.pose()
    }

    fn info(&self) -> f64 {
        self.sim.info()
    }

    fn ticks(&self) -> u32 {
        self.ticks
    }

    fn is_terminal(&self) -> bool {
        self.terminal
    }

    fn state(&self) -> Option<&State> {
        self.state.as_ref()
    }
}

/// Builds the environment named by `config.scenario`.
pub fn make_env(config: &EnvConfig) -> Result<Box<dyn Environment>> {
    Ok(match config.scenario {
        ScenarioKind::Shooter => Box::new(PixelEnv::shooter(config.clone())?),
        ScenarioKind::Gather => Box::new(PixelEnv::gather(config.clone())?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut c = EnvConfig::desk(ScenarioKind::Shooter);
        assert!(c.validate().is_ok());
        c.width = 4;
        assert!(c.validate().is_err());
        let mut c = EnvConfig::desk(ScenarioKind::Gather);
        c.skip_frames = 0;
        assert!(c.validate().is_err());
        c.skip_frames = 1;
        c.channels = 2;
        assert!(c.validate().is_err());
    }

    #[test]
    fn step_before_reset_and_after_terminal() {
        let mut env = make_env(&EnvConfig::desk(ScenarioKind::Gather)).unwrap();
        assert!(matches!(env.step(0), Err(Error::State(_))));
        env.reset(1).unwrap();
        // No-op until death.
        loop {
            if env.step(4).unwrap().terminal {
                break;
            }
        }
        assert!(matches!(env.step(4), Err(Error::State(_))));
        env.reset(2).unwrap();
        assert!(env.step(9).is_err());
    }

    #[test]
    fn scenario_names() {
        assert_eq!(
            "basic".parse::<ScenarioKind>().unwrap(),
            ScenarioKind::Shooter
        );
        assert_eq!(ScenarioKind::Gather.to_string(), "gather");
        assert!("doom".parse::<ScenarioKind>().is_err());
    }
}
