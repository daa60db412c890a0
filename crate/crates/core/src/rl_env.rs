//! The surface an external learner trains against: per-agent feature
//! channels, the region + point goal decode, the team reward and a
//! goal-driven macro-step.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episode::{Episode, EpisodeConfig, EpisodeError};
use crate::geometry::{Cell, Point};
use crate::grid::Grid;
use crate::mapping::{OccGrid, THRESHOLD};
use crate::metrics::OVERLAP_SUM;
use crate::nav::dilate_obstacles;
use crate::planners::REPLAN_PERIOD;
use crate::scene::Scene;

pub const CHANNELS: usize = 6;
pub const DEFAULT_FEATURE_SIZE: usize = 240;
pub const TRAJECTORY_DECAY: f64 = 0.9;
/// Regions per axis of the goal action.
pub const REGIONS: u8 = 8;

pub const COVERAGE_COEF: f64 = 0.02;
pub const SUCCESS_HIGH: f64 = 0.95;
pub const SUCCESS_LOW: f64 = 0.90;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error("team area fell from {prev} to {now} m²")]
    NonMonotoneArea { prev: f64, now: f64 },
    #[error("no active agent {0}")]
    UnknownAgent(usize),
    #[error("goal region {0:?} outside 0..8")]
    BadRegion((u8, u8)),
}

/// Where the feature pixels sit on the merged map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrame {
    pub size: usize,
    /// World lattice cell of merged-map cell (0, 0).
    pub origin: Cell,
    pub width: usize,
    pub height: usize,
}

impl FeatureFrame {
    fn of(map: &OccGrid, size: usize) -> Self {
        FeatureFrame {
            size,
            origin: map.lattice_offset(),
            width: map.width(),
            height: map.height(),
        }
    }

    /// Pixel holding a world lattice cell, if it is on the map.
    pub fn pixel_of(&self, world: Cell) -> Option<Cell> {
        let x = world.x - self.origin.x;
        let y = world.y - self.origin.y;
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return None;
        }
        Some(Cell::new(
            x * self.size as i64 / self.width as i64,
            y * self.size as i64 / self.height as i64,
        ))
    }

    /// Merged-map cell sampled by a pixel's center.
    fn sample(&self, px: Cell) -> Cell {
        let sx = ((px.x as f64 + 0.5) * self.width as f64 / self.size as f64) as i64;
        let sy = ((px.y as f64 + 0.5) * self.height as f64 / self.size as f64) as i64;
        Cell::new(sx.min(self.width as i64 - 1), sy.min(self.height as i64 - 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Obstacle = 0,
    Explored = 1,
    Position = 2,
    Trajectory = 3,
    PreviousGoal = 4,
    GoalHistory = 5,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    pub channels: [Grid<f64>; CHANNELS],
    pub frame: FeatureFrame,
}

impl FeatureStack {
    pub fn channel(&self, c: Channel) -> &Grid<f64> {
        &self.channels[c as usize]
    }
}

/// What one agent contributes to its features, in world lattice cells.
#[derive(Debug, Clone, Default)]
pub struct AgentHistory {
    /// Oldest first; the last entry is the current cell.
    pub trail: Vec<Cell>,
    /// Assigned goals, oldest first.
    pub goals: Vec<Cell>,
}

pub fn build_feature_channels(map: &OccGrid, agent: &AgentHistory, size: usize, decay: f64) -> FeatureStack {
    let frame = FeatureFrame::of(map, size);
    let blank = Grid::filled(size, size, 0.0);
    let mut ch: [Grid<f64>; CHANNELS] = std::array::from_fn(|_| blank.clone());
    for px in blank.cells() {
        let c = frame.sample(px);
        ch[Channel::Obstacle as usize][px] = map.obstacle[c];
        ch[Channel::Explored as usize][px] = map.explored[c];
    }
    let mut weight = 1.0;
    for cell in agent.trail.iter().rev() {
        if let Some(px) = frame.pixel_of(*cell) {
            let v = &mut ch[Channel::Trajectory as usize][px];
            *v = v.max(weight);
        }
        weight *= decay;
    }
    if let Some(px) = agent.trail.last().and_then(|c| frame.pixel_of(*c)) {
        ch[Channel::Position as usize][px] = 1.0;
    }
    if let Some(px) = agent.goals.last().and_then(|c| frame.pixel_of(*c)) {
        ch[Channel::PreviousGoal as usize][px] = 1.0;
    }
    for px in agent.goals.iter().filter_map(|c| frame.pixel_of(*c)) {
        ch[Channel::GoalHistory as usize][px] = 1.0;
    }
    FeatureStack { channels: ch, frame }
}

/// A region of the 8×8 split plus a point inside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalGoal {
    pub region: (u8, u8),
    pub point: (f64, f64),
}

impl GlobalGoal {
    pub fn new(region: (u8, u8), point: (f64, f64)) -> Result<Self, EnvError> {
        if region.0 >= REGIONS || region.1 >= REGIONS {
            return Err(EnvError::BadRegion(region));
        }
        Ok(GlobalGoal {
            region,
            point: (point.0.clamp(0.0, 1.0), point.1.clamp(0.0, 1.0)),
        })
    }

    /// Normalized map coordinates in [0, 1]².
    pub fn normalized(&self) -> (f64, f64) {
        let n = REGIONS as f64;
        (
            (self.region.0 as f64 + self.point.0) / n,
            (self.region.1 as f64 + self.point.1) / n,
        )
    }

    /// Inverse of [`normalized`](Self::normalized): region is the floor of
    /// `8·x` (7 at the far edge), point the remainder.
    pub fn from_normalized(x: f64, y: f64) -> Self {
        let split = |v: f64| {
            let s = v.clamp(0.0, 1.0) * REGIONS as f64;
            let g = (s.floor() as u8).min(REGIONS - 1);
            (g, s - g as f64)
        };
        let (gx, px) = split(x);
        let (gy, py) = split(y);
        GlobalGoal { region: (gx, gy), point: (px, py) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodedGoal {
    pub normalized: (f64, f64),
    /// World lattice cell, snapped off obstacles.
    pub cell: Cell,
    pub world: Point,
}

pub fn decode_goal(goal: &GlobalGoal, map: &OccGrid) -> DecodedGoal {
    let (xl, yl) = goal.normalized();
    let w = map.width() as i64;
    let h = map.height() as i64;
    let mut c = Cell::new(
        ((xl * w as f64).floor() as i64).min(w - 1),
        ((yl * h as f64).floor() as i64).min(h - 1),
    );
    if map.obstacle[c] >= THRESHOLD {
        if let Some(s) = dilate_obstacles(map, 0, 0.0).nearest_traversable(c) {
            c = s;
        }
    }
    let off = map.lattice_offset();
    DecodedGoal {
        normalized: (xl, yl),
        cell: Cell::new(c.x + off.x, c.y + off.y),
        world: map.center_of(c),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub team_coverage: f64,
    pub individual_coverage: f64,
    pub success: f64,
    pub overlap_penalty: f64,
    pub time_penalty: f64,
    pub total: f64,
}

/// Explored-probability grids per agent, aligned with the scene, at one
/// macro-step boundary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AreaSnapshot {
    pub agents: BTreeMap<usize, Grid<f64>>,
}

/// Reward bookkeeping carried between macro-steps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RewardState {
    pub snapshot: AreaSnapshot,
    /// Mean pairwise overlap area at this boundary, m².
    pub overlap: f64,
    pub fired_low: bool,
    pub fired_high: bool,
}

fn cell_area(scene: &Scene) -> f64 {
    scene.resolution() * scene.resolution()
}

fn seen(g: Option<&Grid<f64>>, c: Cell) -> bool {
    g.is_some_and(|g| g[c] >= THRESHOLD)
}

fn team_cells(s: &AreaSnapshot, scene: &Scene) -> Vec<bool> {
    scene
        .grid()
        .cells()
        .map(|c| scene.is_free(c) && s.agents.values().any(|g| g[c] >= THRESHOLD))
        .collect()
}

/// Team explored free area, m².
pub fn team_area(s: &AreaSnapshot, scene: &Scene) -> f64 {
    team_cells(s, scene).iter().filter(|b| **b).count() as f64 * cell_area(scene)
}

/// Mean over ordered pairs (k, u) of the free area where agent k's
/// probability now plus agent u's one boundary earlier exceeds 1.2.
pub fn pair_overlap(now: &AreaSnapshot, before: &AreaSnapshot, active: &[usize], scene: &Scene) -> f64 {
    if active.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for &k in active {
        for &u in active {
            if k == u {
                continue;
            }
            let gk = now.agents.get(&k);
            let gu = before.agents.get(&u);
            let n = scene
                .grid()
                .cells()
                .filter(|c| scene.is_free(*c))
                .filter(|c| {
                    let a = gk.map_or(0.0, |g| g[*c]);
                    let b = gu.map_or(0.0, |g| g[*c]);
                    a + b > OVERLAP_SUM
                })
                .count();
            total += n as f64 * cell_area(scene);
            pairs += 1;
        }
    }
    total / pairs as f64
}

fn bracket(ratio: f64, below: f64, mid: f64, above: f64) -> f64 {
    if ratio < SUCCESS_LOW {
        below
    } else if ratio < SUCCESS_HIGH {
        mid
    } else {
        above
    }
}

/// Rewards for the macro-step from `prev` to `now`, one breakdown per agent
/// in `active`, plus the state to carry forward.
pub fn compute_reward(
    prev: &RewardState,
    now: AreaSnapshot,
    active: &[usize],
    scene: &Scene,
) -> Result<(Vec<(usize, RewardBreakdown)>, RewardState), EnvError> {
    let area = cell_area(scene);
    let before = team_cells(&prev.snapshot, scene);
    let n0 = before.iter().filter(|b| **b).count();
    let n1 = team_cells(&now, scene).iter().filter(|b| **b).count();
    let (a0, a1) = (n0 as f64 * area, n1 as f64 * area);
    if n1 < n0 {
        return Err(EnvError::NonMonotoneArea { prev: a0, now: a1 });
    }
    let ratio = n1 as f64 / scene.free_cell_count() as f64;

    let overlap = pair_overlap(&now, &prev.snapshot, active, scene);
    let d_overlap = overlap - prev.overlap;
    let overlap_penalty = -d_overlap * bracket(ratio, 0.01, 0.006, 0.0);
    let time_penalty = bracket(ratio, -0.002, -0.001, -0.0002);

    let mut success = 0.0;
    let mut fired_low = prev.fired_low;
    let mut fired_high = prev.fired_high;
    if !fired_high && ratio >= SUCCESS_HIGH {
        success += ratio;
        fired_high = true;
    }
    if !fired_low && ratio >= SUCCESS_LOW {
        success += 0.5 * ratio;
        fired_low = true;
    }
    let team_coverage = COVERAGE_COEF * (a1 - a0);

    let out = active
        .iter()
        .map(|&k| {
            let gk = now.agents.get(&k);
            let fresh = scene
                .grid()
                .cells()
                .zip(&before)
                .filter(|(c, b)| scene.is_free(*c) && !**b && seen(gk, *c))
                .count();
            let mut r = RewardBreakdown {
                team_coverage,
                individual_coverage: COVERAGE_COEF * fresh as f64 * area,
                success,
                overlap_penalty,
                time_penalty,
                total: 0.0,
            };
            r.total = r.team_coverage + r.individual_coverage + r.success + r.overlap_penalty + r.time_penalty;
            (k, r)
        })
        .collect();
    Ok((
        out,
        RewardState {
            snapshot: now,
            overlap,
            fired_low,
            fired_high,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    pub feature_size: usize,
    pub trajectory_decay: f64,
}

impl Default for EnvParams {
    fn default() -> Self {
        EnvParams {
            feature_size: DEFAULT_FEATURE_SIZE,
            trajectory_decay: TRAJECTORY_DECAY,
        }
    }
}

/// One JSON line of the macro-step trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub t: u64,
    pub goals: Vec<(usize, DecodedGoal)>,
    pub rewards: Vec<(usize, RewardBreakdown)>,
    pub coverage: f64,
}

pub struct StepOutcome {
    pub features: Vec<(usize, FeatureStack)>,
    pub rewards: Vec<(usize, RewardBreakdown)>,
    pub done: bool,
    pub trace: TraceLine,
}

pub struct ExploreEnv {
    episode: Episode,
    params: EnvParams,
    reward: RewardState,
}

impl ExploreEnv {
    /// Resets the episode; the reward baseline is the empty map, so the
    /// first macro-step is credited with the initial scans.
    pub fn new(scene: Scene, cfg: EpisodeConfig, params: EnvParams) -> Result<Self, EnvError> {
        let episode = Episode::new(scene, cfg)?;
        Ok(ExploreEnv {
            episode,
            params,
            reward: RewardState::default(),
        })
    }

    pub fn episode(&self) -> &Episode {
        &self.episode
    }

    pub fn reward_state(&self) -> &RewardState {
        &self.reward
    }

    pub fn is_done(&self) -> bool {
        self.episode.is_done()
    }

    pub fn history(&self, id: usize) -> AgentHistory {
        let ep = &self.episode;
        let res = ep.merged().resolution;
        let lattice = |p: Point| Cell::new((p.x / res).floor() as i64, (p.y / res).floor() as i64);
        let a = &ep.sim().agents[id];
        AgentHistory {
            trail: a.trajectory.iter().map(|p| lattice(p.position())).collect(),
            goals: ep.goal_log().iter().filter(|g| g.agent == id).map(|g| g.cell).collect(),
        }
    }

    pub fn observe(&self) -> Vec<(usize, FeatureStack)> {
        self.episode
            .sim()
            .active_ids()
            .into_iter()
            .map(|id| {
                let f = build_feature_channels(
                    self.episode.merged(),
                    &self.history(id),
                    self.params.feature_size,
                    self.params.trajectory_decay,
                );
                (id, f)
            })
            .collect()
    }

    fn snapshot(&self) -> AreaSnapshot {
        let ep = &self.episode;
        AreaSnapshot {
            agents: (0..ep.sim().agents.len())
                .map(|id| (id, ep.truth_grid(id).clone()))
                .collect(),
        }
    }

    /// Decodes the goals, runs up to one replan period of simulator steps
    /// and scores the result. Agents without a new goal keep theirs.
    pub fn macro_step(&mut self, goals: &[(usize, GlobalGoal)]) -> Result<StepOutcome, EnvError> {
        if self.episode.is_done() {
            return Err(EpisodeError::EpisodeDone(self.episode.t()).into());
        }
        let active = self.episode.sim().active_ids();
        let mut decoded = Vec::with_capacity(goals.len());
        for (id, g) in goals {
            if !active.contains(id) {
                return Err(EnvError::UnknownAgent(*id));
            }
            decoded.push((*id, decode_goal(g, self.episode.merged())));
        }
        let points: Vec<(usize, Point)> = decoded.iter().map(|(id, d)| (*id, d.world)).collect();
        self.episode.set_goals(&points);
        for _ in 0..REPLAN_PERIOD {
            if self.episode.is_done() {
                break;
            }
            self.episode.step()?;
        }
        let active = self.episode.sim().active_ids();
        let (rewards, next) = compute_reward(&self.reward, self.snapshot(), &active, self.episode.scene())?;
        self.reward = next;
        let trace = TraceLine {
            t: self.episode.t(),
            goals: decoded,
            rewards: rewards.clone(),
            coverage: self.episode.coverage_ratio(),
        };
        Ok(StepOutcome {
            features: self.observe(),
            rewards,
            done: self.episode.is_done(),
            trace,
        })
    }
}

impl TraceLine {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace line serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::CellRect;

    #[test]
    fn decode_examples() {
        let g = GlobalGoal::new((3, 5), (0.5, 0.5)).unwrap();
        assert_eq!(g.normalized(), (0.4375, 0.6875));
        assert_eq!(GlobalGoal::new((0, 0), (0.0, 0.0)).unwrap().normalized(), (0.0, 0.0));
        assert_eq!(GlobalGoal::new((7, 7), (1.0, 1.0)).unwrap().normalized(), (1.0, 1.0));
        assert!(GlobalGoal::new((8, 0), (0.0, 0.0)).is_err());
    }

    #[test]
    fn decode_snaps_off_obstacles() {
        let mut m = OccGrid::world(CellRect { x0: 0, y0: 0, x1: 7, y1: 7 }, 0.05);
        m.explored.fill(1.0);
        m.obstacle[Cell::new(4, 4)] = 1.0;
        let g = GlobalGoal::new((4, 4), (0.5, 0.5)).unwrap();
        let d = decode_goal(&g, &m);
        assert_ne!(d.cell, Cell::new(4, 4));
        assert_eq!(d.cell.dist2(Cell::new(4, 4)), 1);
    }

    #[test]
    fn trajectory_decay() {
        let mut m = OccGrid::world(CellRect { x0: 0, y0: 0, x1: 9, y1: 9 }, 0.05);
        m.explored.fill(1.0);
        let h = AgentHistory {
            trail: vec![Cell::new(1, 1), Cell::new(2, 2), Cell::new(3, 3), Cell::new(3, 3)],
            goals: vec![],
        };
        let f = build_feature_channels(&m, &h, 10, 0.9);
        let tr = f.channel(Channel::Trajectory);
        assert_eq!(tr[Cell::new(3, 3)], 1.0);
        assert!((tr[Cell::new(2, 2)] - 0.81).abs() < 1e-12);
        assert!(f.channel(Channel::PreviousGoal).as_slice().iter().all(|v| *v == 0.0));
        assert_eq!(f.channel(Channel::Position).as_slice().iter().sum::<f64>(), 1.0);
    }
}
