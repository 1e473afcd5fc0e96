//! Gather: survive in a room whose floor drains life by walking over health packs.
//!
//! Life starts at 100, drops by 1 every tick and rises by 25 (capped at 100)
//! for each pack picked up. The reward of a tick is the change in life, so an
//! episode's return telescopes to `life_final - 100`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::camera::{wrap_angle, Camera, Canvas, Material, ROOM_HALF};
use super::{Pose, Simulation};
use crate::rbf::Frame;

pub(crate) const TIMEOUT_TICKS: u32 = 2100;

pub const START_LIFE: f64 = 100.0;
pub const DECAY_PER_TICK: f64 = 1.0;
pub const PACK_GAIN: f64 = 25.0;
pub const N_PACKS: usize = 8;
pub const PICKUP_RADIUS: f64 = 0.15;
pub const PACK_RADIUS: f64 = 0.12;
pub const PACK_HEIGHT: f64 = 0.3;
pub const FOV: f64 = std::f64::consts::FRAC_PI_2;
pub const MOVE_PER_TICK: f64 = 0.03;
pub const TURN_PER_TICK: f64 = 4.0 * std::f64::consts::PI / 180.0;

const AGENT_MARGIN: f64 = 0.08;
const PACK_MARGIN: f64 = 0.1;
/// Packs never spawn this close to the agent.
const SPAWN_CLEARANCE: f64 = 0.3;

const CEILING: Material = Material::new(0.15, [0.2, 0.2, 0.25]);
const FLOOR: Material = Material::new(0.3, [0.15, 0.4, 0.15]);
const WALLS: [Material; 4] = [
    Material::new(0.55, [0.5, 0.45, 0.35]),
    Material::new(0.7, [0.6, 0.55, 0.45]),
    Material::new(0.45, [0.4, 0.38, 0.3]),
    Material::new(0.62, [0.55, 0.5, 0.4]),
];
const PACK: Material = Material::new(1.0, [0.95, 0.1, 0.1]);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GatherAction {
    Forward,
    Backward,
    TurnLeft,
    TurnRight,
    Noop,
}

impl GatherAction {
    pub const ALL: [GatherAction; 5] = [
        GatherAction::Forward,
        GatherAction::Backward,
        GatherAction::TurnLeft,
        GatherAction::TurnRight,
        GatherAction::Noop,
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatherState {
    pub agent_x: f64,
    pub agent_y: f64,
    pub agent_heading: f64,
    pub packs: Vec<(f64, f64)>,
    pub life: f64,
    pub steps: u32,
    pub pickups: u32,
}

#[derive(Debug, Clone)]
pub struct GatherSim {
    state: GatherState,
    rng: ChaCha8Rng,
}

impl Default for GatherSim {
    fn default() -> Self {
        Self::new()
    }
}

impl GatherSim {
    pub fn new() -> Self {
        let mut sim = Self {
            state: GatherState {
                agent_x: 0.0,
                agent_y: 0.0,
                agent_heading: 0.0,
                packs: Vec::new(),
                life: START_LIFE,
                steps: 0,
                pickups: 0,
            },
            rng: ChaCha8Rng::seed_from_u64(0),
        };
        sim.reset(0);
        sim
    }

    pub fn state(&self) -> &GatherState {
        &self.state
    }

    pub fn set_state(&mut self, state: GatherState) {
        self.state = state;
        let lim = ROOM_HALF - AGENT_MARGIN;
        self.state.agent_x = self.state.agent_x.clamp(-lim, lim);
        self.state.agent_y = self.state.agent_y.clamp(-lim, lim);
        self.state.life = self.state.life.min(START_LIFE);
    }

    fn fresh_pack(&mut self) -> (f64, f64) {
        let lim = ROOM_HALF - PACK_MARGIN;
        loop {
            let p = (
                self.rng.random_range(-lim..=lim),
                self.rng.random_range(-lim..=lim),
            );
            let (dx, dy) = (p.0 - self.state.agent_x, p.1 - self.state.agent_y);
            if dx.hypot(dy) >= SPAWN_CLEARANCE {
                return p;
            }
        }
    }

    fn walk(&mut self, dist: f64) {
        let lim = ROOM_HALF - AGENT_MARGIN;
        let h = self.state.agent_heading;
        self.state.agent_x = (self.state.agent_x + dist * h.cos()).clamp(-lim, lim);
        self.state.agent_y = (self.state.agent_y + dist * h.sin()).clamp(-lim, lim);
    }
}

impl Simulation for GatherSim {
    fn n_actions(&self) -> usize {
        GatherAction::ALL.len()
    }

    fn reset(&mut self, episode_seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(episode_seed);
        self.state.agent_x = 0.0;
        self.state.agent_y = 0.0;
        self.state.agent_heading = wrap_angle(self.rng.random_range(0.0..TAU));
        self.state.life = START_LIFE;
        self.state.steps = 0;
        self.state.pickups = 0;
        self.state.packs.clear();
        for _ in 0..N_PACKS {
            let p = self.fresh_pack();
            self.state.packs.push(p);
        }
    }

    fn tick(&mut self, action: usize) -> (f64, bool) {
        let before = self.state.life;
        self.state.steps += 1;
        match GatherAction::ALL[action] {
            GatherAction::Forward => self.walk(MOVE_PER_TICK),
            GatherAction::Backward => self.walk(-MOVE_PER_TICK),
            GatherAction::TurnLeft => {
                self.state.agent_heading = wrap_angle(self.state.agent_heading + TURN_PER_TICK)
            }
            GatherAction::TurnRight => {
                self.state.agent_heading = wrap_angle(self.state.agent_heading - TURN_PER_TICK)
            }
            GatherAction::Noop => {}
        }
        let mut life = before - DECAY_PER_TICK;
        for i in 0..self.state.packs.len() {
            let (px, py) = self.state.packs[i];
            let d = (px - self.state.agent_x).hypot(py - self.state.agent_y);
            if d <= PICKUP_RADIUS {
                life += PACK_GAIN;
                self.state.pickups += 1;
                self.state.packs[i] = self.fresh_pack();
            }
        }
        self.state.life = life.min(START_LIFE);
        (self.state.life - before, self.state.life <= 0.0)
    }

    fn draw(&self, width: usize, height: usize, channels: usize) -> Frame {
        let s = &self.state;
        let cam = Camera::new(s.agent_x, s.agent_y, s.agent_heading, FOV, width, height);
        let mut canvas = Canvas::new(width, height, channels);
        canvas.draw_room(&cam, CEILING, FLOOR, WALLS);
        let mut visible: Vec<(f64, f64)> = s
            .packs
            .iter()
            .map(|&(px, py)| cam.to_camera(px, py))
            .filter(|&(depth, _)| depth > 0.05)
            .collect();
        // Far to near so closer packs overwrite.
        visible.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (depth, lateral) in visible {
            let cx = cam.column(depth, lateral);
            let top = cam.row(depth, PACK_HEIGHT);
            let bottom = cam.row(depth, 0.0);
            let rx = PACK_RADIUS / depth * cam.focal();
            canvas.fill_ellipse(cx, (top + bottom) / 2.0, rx, (bottom - top) / 2.0, PACK);
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
        self.state.life
    }
}
