//! Shooter: a target stands on a line in front of a fixed spawn point.
//!
//! Every tick costs 1, a missed shot costs 5 and a hit pays 101 and ends the
//! episode. A shot hits when the aim line passes within the target radius,
//! which is the same as the projected blob covering the screen centre.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::camera::{wrap_angle, Camera, Canvas, Material, ROOM_HALF};
use super::{Pose, Simulation};
use crate::rbf::Frame;

pub(crate) const TIMEOUT_TICKS: u32 = 300;

pub const HIT_REWARD: f64 = 101.0;
pub const MISS_PENALTY: f64 = -5.0;
pub const TICK_PENALTY: f64 = -1.0;

pub const FOV: f64 = FRAC_PI_2;
pub const SPAWN: (f64, f64) = (0.0, -0.5);
pub const TARGET_LINE_Y: f64 = 0.6;
pub const TARGET_RADIUS: f64 = 0.1;
pub const TARGET_HEIGHT: f64 = 0.6;
/// Target x is drawn uniformly from `[-TARGET_MAX_OFFSET, TARGET_MAX_OFFSET]`.
pub const TARGET_MAX_OFFSET: f64 = 0.8;
pub const MOVE_PER_TICK: f64 = 0.025;
pub const TURN_PER_TICK: f64 = 10.0 * std::f64::consts::PI / 180.0;
/// Ticks between two shots.
pub const WEAPON_COOLDOWN: u32 = 6;

const AGENT_MARGIN: f64 = 0.1;
const MAX_AGENT_Y: f64 = -0.2;

const CEILING: Material = Material::new(0.2, [0.25, 0.25, 0.3]);
const FLOOR: Material = Material::new(0.35, [0.4, 0.35, 0.3]);
const WALLS: [Material; 4] = [
    Material::new(0.6, [0.6, 0.55, 0.45]),
    Material::new(0.75, [0.7, 0.7, 0.65]),
    Material::new(0.5, [0.5, 0.45, 0.4]),
    Material::new(0.65, [0.55, 0.6, 0.6]),
];
const TARGET: Material = Material::new(0.05, [0.35, 0.05, 0.05]);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShooterAction {
    MoveRight,
    MoveLeft,
    Shoot,
    TurnLeft,
    TurnRight,
    Forward,
    Backward,
    Noop,
}

impl ShooterAction {
    pub const ALL: [ShooterAction; 8] = [
        ShooterAction::MoveRight,
        ShooterAction::MoveLeft,
        ShooterAction::Shoot,
        ShooterAction::TurnLeft,
        ShooterAction::TurnRight,
        ShooterAction::Forward,
        ShooterAction::Backward,
        ShooterAction::Noop,
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShooterState {
    pub agent_x: f64,
    pub agent_y: f64,
    pub agent_heading: f64,
    pub target_x: f64,
    pub steps: u32,
    pub cooldown: u32,
    pub target_hit: bool,
}

impl ShooterState {
    fn spawn(target_x: f64) -> Self {
        Self {
            agent_x: SPAWN.0,
            agent_y: SPAWN.1,
            agent_heading: FRAC_PI_2,
            target_x,
            steps: 0,
            cooldown: 0,
            target_hit: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShooterSim {
    state: ShooterState,
}

impl Default for ShooterSim {
    fn default() -> Self {
        Self::new()
    }
}

impl ShooterSim {
    pub fn new() -> Self {
        Self {
            state: ShooterState::spawn(0.0),
        }
    }

    pub fn state(&self) -> &ShooterState {
        &self.state
    }

    /// Places agent and target explicitly. Positions are clamped into the room.
    pub fn set_state(&mut self, state: ShooterState) {
        self.state = state;
        self.clamp();
    }

    fn camera(&self, width: usize, height: usize) -> Camera {
        let s = &self.state;
        Camera::new(s.agent_x, s.agent_y, s.agent_heading, FOV, width, height)
    }

    /// `(depth, lateral)` of the target relative to the aim line.
    pub fn target_in_view(&self) -> (f64, f64) {
        // Screen geometry does not depend on resolution here.
        self.camera(2, 2)
            .to_camera(self.state.target_x, TARGET_LINE_Y)
    }

    pub fn would_hit(&self) -> bool {
        let (depth, lateral) = self.target_in_view();
        depth > 0.0 && lateral.abs() <= TARGET_RADIUS
    }

    fn clamp(&mut self) {
        let s = &mut self.state;
        let lim = ROOM_HALF - AGENT_MARGIN;
        s.agent_x = s.agent_x.clamp(-lim, lim);
        s.agent_y = s.agent_y.clamp(-lim, MAX_AGENT_Y);
        s.agent_heading = wrap_angle(s.agent_heading);
    }

    fn walk(&mut self, forward: f64, strafe_right: f64) {
        let h = self.state.agent_heading;
        self.state.agent_x += forward * h.cos() + strafe_right * h.sin();
        self.state.agent_y += forward * h.sin() - strafe_right * h.cos();
        self.clamp();
    }
}

impl Simulation for ShooterSim {
    fn n_actions(&self) -> usize {
        ShooterAction::ALL.len()
    }

    fn reset(&mut self, episode_seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
        let x = rng.random_range(-TARGET_MAX_OFFSET..=TARGET_MAX_OFFSET);
        self.state = ShooterState::spawn(x);
    }

    fn tick(&mut self, action: usize) -> (f64, bool) {
        let mut reward = TICK_PENALTY;
        self.state.steps += 1;
        match ShooterAction::ALL[action] {
            ShooterAction::MoveRight => self.walk(0.0, MOVE_PER_TICK),
            ShooterAction::MoveLeft => self.walk(0.0, -MOVE_PER_TICK),
            ShooterAction::Forward => self.walk(MOVE_PER_TICK, 0.0),
            ShooterAction::Backward => self.walk(-MOVE_PER_TICK, 0.0),
            ShooterAction::TurnLeft => {
                self.state.agent_heading = wrap_angle(self.state.agent_heading + TURN_PER_TICK)
            }
            ShooterAction::TurnRight => {
                self.state.agent_heading = wrap_angle(self.state.agent_heading - TURN_PER_TICK)
            }
            ShooterAction::Shoot if self.state.cooldown == 0 => {
                self.state.cooldown = WEAPON_COOLDOWN;
                if self.would_hit() {
                    self.state.target_hit = true;
                    reward += HIT_REWARD;
                } else {
                    reward += MISS_PENALTY;
                }
            }
            ShooterAction::Shoot | ShooterAction::Noop => {}
        }
        // The cooldown set by a shot this tick counts this tick as the first.
        self.state.cooldown = self.state.cooldown.saturating_sub(1);
        (reward, self.state.target_hit)
    }

    fn draw(&self, width: usize, height: usize, channels: usize) -> Frame {
        let cam = self.camera(width, height);
        let mut canvas = Canvas::new(width, height, channels);
        canvas.draw_room(&cam, CEILING, FLOOR, WALLS);
        let (depth, lateral) = cam.to_camera(self.state.target_x, TARGET_LINE_Y);
        if depth > 1e-3 && !self.state.target_hit {
            let cx = cam.column(depth, lateral);
            let top = cam.row(depth, TARGET_HEIGHT);
            let bottom = cam.row(depth, 0.0);
            let rx = TARGET_RADIUS / depth * cam.focal();
            canvas.fill_ellipse(cx, (top + bottom) / 2.0, rx, (bottom - top) / 2.0, TARGET);
        }
        canvas.into_frame()
    }

    fn pose(&self) -> Pose {
        Pose {
            x: self.state.agent_x,
            y: self.state.agent_y,
            heading: self.state.agent_heading,
        }
    }

    fn info(&self) -> f64 {
        let (depth, lateral) = self.target_in_view();
        lateral.atan2(depth)
    }
}
