//! Episode state machine: agent kinematics, actuation/odometry noise,
//! ray-cast sensing and the team-size schedule.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{traverse, Cell, Point, Pose};
use crate::scene::{CellKind, Scene};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("agent {0} is inactive")]
    InactiveAgent(usize),
    #[error("pose ({x:.3}, {y:.3}) is not on a free cell")]
    PoseOnObstacle { x: f64, y: f64 },
    #[error("expected {expected} actions, got {got}")]
    ActionCountMismatch { expected: usize, got: usize },
    #[error("could only place {placed} of {needed} agents")]
    SpawnFailure { needed: usize, placed: usize },
    #[error("invalid team schedule: {0}")]
    InvalidSchedule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    TurnLeft,
    TurnRight,
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    pub forward_m: f64,
    pub turn_rad: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        MotionParams {
            forward_m: 0.25,
            turn_rad: 10f64.to_radians(),
        }
    }
}

/// Gaussian noise magnitudes. Translation sigmas in meters, rotation in
/// radians; all zero disables noise entirely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub actuation_t: f64,
    pub actuation_r: f64,
    pub odometry_t: f64,
    pub odometry_r: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            actuation_t: 0.005,
            actuation_r: 0.3f64.to_radians(),
            odometry_t: 0.005,
            odometry_r: 0.3f64.to_radians(),
        }
    }
}

impl NoiseParams {
    pub fn off() -> Self {
        NoiseParams {
            actuation_t: 0.0,
            actuation_r: 0.0,
            odometry_t: 0.0,
            odometry_r: 0.0,
        }
    }

    pub fn is_off(&self) -> bool {
        *self == Self::off()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorParams {
    pub rays: usize,
    pub fov_rad: f64,
    pub max_range: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        SensorParams {
            rays: 90,
            fov_rad: 90f64.to_radians(),
            max_range: 3.5,
        }
    }
}

impl SensorParams {
    /// Bearings relative to the heading, strictly increasing across the FOV.
    pub fn bearings(&self) -> Vec<f64> {
        if self.rays == 1 {
            return vec![0.0];
        }
        let half = self.fov_rad / 2.0;
        (0..self.rays)
            .map(|i| -half + self.fov_rad * i as f64 / (self.rays - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimParams {
    pub motion: MotionParams,
    pub noise: NoiseParams,
    pub sensor: SensorParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hit {
    Obstacle,
    MaxRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub bearing: f64,
    pub range: f64,
    pub hit: Hit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalScan {
    pub origin: Pose,
    pub rays: Vec<Ray>,
}

/// Team size `n_start` until `switch_step`, `n_after` from then on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TeamSchedule {
    pub n_start: usize,
    pub n_after: usize,
    pub switch_step: u64,
}

pub const MAX_AGENTS: usize = 8;

impl TeamSchedule {
    pub fn fixed(n: usize) -> Self {
        TeamSchedule {
            n_start: n,
            n_after: n,
            switch_step: 90,
        }
    }

    pub fn switching(n_start: usize, n_after: usize) -> Self {
        TeamSchedule {
            n_start,
            n_after,
            switch_step: 90,
        }
    }

    /// `n_after` may be zero, which leaves an empty team after the switch.
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_start == 0 || self.n_start > MAX_AGENTS || self.n_after > MAX_AGENTS {
            return Err(SimError::InvalidSchedule(format!(
                "team sizes {}→{} outside 1..={MAX_AGENTS}",
                self.n_start, self.n_after
            )));
        }
        Ok(())
    }

    pub fn total_agents(&self) -> usize {
        self.n_start.max(self.n_after)
    }

    pub fn active_count(&self, t: u64) -> usize {
        if t < self.switch_step {
            self.n_start
        } else {
            self.n_after
        }
    }
}

impl std::fmt::Display for TeamSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.n_start == self.n_after {
            write!(f, "{}", self.n_start)
        } else {
            write!(f, "{}:{}@{}", self.n_start, self.n_after, self.switch_step)
        }
    }
}

impl std::str::FromStr for TeamSchedule {
    type Err = SimError;

    /// `N`, `N:M` (switch at 90) or `N:M@S`.
    fn from_str(s: &str) -> Result<Self, SimError> {
        let bad = || SimError::InvalidSchedule(format!("cannot parse {s:?}"));
        let (counts, switch_step) = match s.split_once('@') {
            Some((c, step)) => (c, step.trim().parse().map_err(|_| bad())?),
            None => (s, 90),
        };
        let (n_start, n_after) = match counts.split_once(':') {
            Some((a, b)) => (
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
            ),
            None => {
                let n = counts.trim().parse().map_err(|_| bad())?;
                (n, n)
            }
        };
        let sched = TeamSchedule {
            n_start,
            n_after,
            switch_step,
        };
        sched.validate()?;
        Ok(sched)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub true_pose: Pose,
    pub est_pose: Pose,
    pub birth_pose: Pose,
    pub active: bool,
    /// Estimated poses, starting with the birth pose.
    pub trajectory: Vec<Pose>,
}

impl AgentState {
    pub fn new(id: usize, birth: Pose, active: bool) -> Self {
        AgentState {
            id,
            true_pose: birth,
            est_pose: birth,
            birth_pose: birth,
            active,
            trajectory: vec![birth],
        }
    }

    /// Executes one action. The true pose receives the command plus actuation
    /// noise and is blocked by non-free cells; the estimate composes the
    /// realised motion with independent odometry noise.
    pub fn apply_action(
        &mut self,
        action: Action,
        scene: &Scene,
        params: &SimParams,
        rng: &mut impl Rng,
    ) -> Result<(), SimError> {
        if !self.active {
            return Err(SimError::InactiveAgent(self.id));
        }
        let noise = &params.noise;
        let old = self.true_pose;
        let new = match action {
            Action::TurnLeft | Action::TurnRight => {
                let sign = if action == Action::TurnLeft { 1.0 } else { -1.0 };
                let dr = gaussian(rng, noise.actuation_r);
                Pose::new(old.x, old.y, old.theta + sign * params.motion.turn_rad + dr)
            }
            Action::Forward => {
                let along = params.motion.forward_m + gaussian(rng, noise.actuation_t);
                let lateral = gaussian(rng, noise.actuation_t);
                let dr = gaussian(rng, noise.actuation_r);
                let (s, c) = old.theta.sin_cos();
                let target = Pose::new(
                    old.x + along * c - lateral * s,
                    old.y + along * s + lateral * c,
                    old.theta + dr,
                );
                if segment_is_free(scene, old.position(), target.position()) {
                    target
                } else {
                    old
                }
            }
        };
        self.true_pose = new;

        self.est_pose = if noise.is_off() {
            new
        } else {
            // realised motion in the old body frame
            let (s, c) = old.theta.sin_cos();
            let (wx, wy) = (new.x - old.x, new.y - old.y);
            let bx = c * wx + s * wy + gaussian(rng, noise.odometry_t);
            let by = -s * wx + c * wy + gaussian(rng, noise.odometry_t);
            let dtheta = crate::geometry::wrap_to_pi(new.theta - old.theta)
                + gaussian(rng, noise.odometry_r);
            let e = self.est_pose;
            let (es, ec) = e.theta.sin_cos();
            Pose::new(e.x + ec * bx - es * by, e.y + es * bx + ec * by, e.theta + dtheta)
        };
        self.trajectory.push(self.est_pose);
        Ok(())
    }
}

fn gaussian(rng: &mut impl Rng, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
    } else {
        0.0
    }
}

fn segment_is_free(scene: &Scene, from: Point, to: Point) -> bool {
    let res = scene.resolution();
    let end_cell = scene.cell_of(to);
    scene.is_free(end_cell)
        && traverse(from, to, Point::default(), res).all(|c| scene.is_free(c.cell))
}

/// Casts the scan rays from `pose` until they enter a non-free cell or reach
/// the sensor range.
pub fn sense(scene: &Scene, pose: Pose, sensor: &SensorParams) -> Result<LocalScan, SimError> {
    if !scene.is_free(scene.cell_of(pose.position())) {
        return Err(SimError::PoseOnObstacle {
            x: pose.x,
            y: pose.y,
        });
    }
    let origin = pose.position();
    let rays = sensor
        .bearings()
        .into_iter()
        .map(|bearing| {
            let (s, c) = (pose.theta + bearing).sin_cos();
            let end = Point::new(
                origin.x + sensor.max_range * c,
                origin.y + sensor.max_range * s,
            );
            let blocked = traverse(origin, end, Point::default(), scene.resolution())
                .find(|cr| scene.kind(cr.cell) != CellKind::Free);
            match blocked {
                Some(cr) => Ray {
                    bearing,
                    range: (cr.t_enter * sensor.max_range).max(f64::MIN_POSITIVE),
                    hit: Hit::Obstacle,
                },
                None => Ray {
                    bearing,
                    range: sensor.max_range,
                    hit: Hit::MaxRange,
                },
            }
        })
        .collect();
    Ok(LocalScan { origin: pose, rays })
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub t: u64,
    pub agents: Vec<AgentState>,
    pub schedule: TeamSchedule,
    pub params: SimParams,
    rng: ChaCha8Rng,
}

/// Minimum birth separation between agents, meters.
pub const SPAWN_SEPARATION: f64 = 0.5;
/// Spawn cells with this many cells of free clearance are preferred.
const SPAWN_CLEARANCE: i64 = 2;

impl SimState {
    /// Places every agent the schedule will ever use on free spawn cells at
    /// cell centers. Deterministic in `seed`.
    pub fn reset(
        scene: &Scene,
        schedule: TeamSchedule,
        params: SimParams,
        seed: u64,
    ) -> Result<Self, SimError> {
        schedule.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let needed = schedule.total_agents();

        let clear: Vec<Cell> = scene
            .spawn_region()
            .iter()
            .copied()
            .filter(|c| {
                (-SPAWN_CLEARANCE..=SPAWN_CLEARANCE).all(|dy| {
                    (-SPAWN_CLEARANCE..=SPAWN_CLEARANCE).all(|dx| scene.is_free(c.offset(dx, dy)))
                })
            })
            .collect();
        let mut candidates = if clear.len() >= needed {
            clear
        } else {
            scene.spawn_region().to_vec()
        };
        candidates.shuffle(&mut rng);

        let mut births: Vec<Point> = Vec::with_capacity(needed);
        for c in candidates {
            if births.len() == needed {
                break;
            }
            let p = scene.center_of(c);
            if births.iter().all(|b| b.dist(p) >= SPAWN_SEPARATION) {
                births.push(p);
            }
        }
        if births.len() < needed {
            return Err(SimError::SpawnFailure {
                needed,
                placed: births.len(),
            });
        }
        let active_now = schedule.active_count(0);
        let agents = births
            .into_iter()
            .enumerate()
            .map(|(id, p)| {
                let theta = rng.random_range(0.0..TAU);
                AgentState::new(id, Pose::new(p.x, p.y, theta), id < active_now)
            })
            .collect();
        Ok(SimState {
            t: 0,
            agents,
            schedule,
            params,
            rng,
        })
    }

    pub fn active_ids(&self) -> Vec<usize> {
        self.agents.iter().filter(|a| a.active).map(|a| a.id).collect()
    }

    /// Applies one action per active agent (in id order), senses, advances
    /// time and then applies the team schedule.
    pub fn step(
        &mut self,
        scene: &Scene,
        actions: &[Action],
    ) -> Result<Vec<(usize, LocalScan)>, SimError> {
        let active = self.active_ids();
        if actions.len() != active.len() {
            return Err(SimError::ActionCountMismatch {
                expected: active.len(),
                got: actions.len(),
            });
        }
        // agents do not interact, so sequential application equals applying
        // every action to the pre-step snapshot
        for (&id, &action) in active.iter().zip(actions) {
            self.agents[id].apply_action(action, scene, &self.params, &mut self.rng)?;
        }
        let scans = active
            .iter()
            .map(|&id| {
                sense(scene, self.agents[id].true_pose, &self.params.sensor).map(|s| (id, s))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.t += 1;
        let n = self.schedule.active_count(self.t);
        for a in &mut self.agents {
            a.active = a.id < n;
        }
        Ok(scans)
    }

    /// Scans for the currently active agents without moving anyone.
    pub fn sense_all(&self, scene: &Scene) -> Result<Vec<(usize, LocalScan)>, SimError> {
        self.agents
            .iter()
            .filter(|a| a.active)
            .map(|a| sense(scene, a.true_pose, &self.params.sensor).map(|s| (a.id, s)))
            .collect()
    }
}
