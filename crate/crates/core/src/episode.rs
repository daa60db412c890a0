//! The exploration loop shared by the benchmark and the learning
//! environment: sense, map, merge, replan every 15 steps, navigate.

use std::collections::{BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{traverse, Cell, Point, Pose};
use crate::grid::Grid;
use crate::mapping::{integrate_scan, merge_maps, refine_map, MapError, OccGrid, RefineFrame, THRESHOLD};
use crate::metrics::{mutual_overlap, steps_to_threshold, EpisodeRecord, GoalLogEntry};
use crate::nav::{
    dilate_obstacles, fmm_field, local_controller, next_subgoal, plan_path, DistanceField,
    NavParams, TraversableMask,
};
use crate::planners::{
    make_planner, plan_with_fallback, AgentView, GlobalPlanner, PlannerContext, PlannerKind,
    PlannerParams, REPLAN_PERIOD,
};
use crate::scene::{CellRect, Scene};
use crate::sim::{Action, LocalScan, SimError, SimParams, SimState, TeamSchedule};

/// Coverage at which the steps and overlap metrics are taken.
pub const COVERAGE_EVENT: f64 = 0.9;
/// A Forward whose estimated displacement stays below this was blocked.
const BUMP_MOVE_M: f64 = 0.05;

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("episode already finished at step {0}")]
    EpisodeDone(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub planner: PlannerKind,
    pub planner_params: PlannerParams,
    pub schedule: TeamSchedule,
    pub sim: SimParams,
    pub nav: NavParams,
    pub length: u64,
    pub seed: u64,
    /// An agent this close to its global goal turns in place.
    pub goal_reach_m: f64,
}

impl EpisodeConfig {
    pub fn new(planner: PlannerKind, schedule: TeamSchedule, length: u64, seed: u64) -> Self {
        EpisodeConfig {
            planner,
            planner_params: PlannerParams::default(),
            schedule,
            sim: SimParams::default(),
            nav: NavParams::default(),
            length,
            seed,
            goal_reach_m: 0.25,
        }
    }
}

struct NavCache {
    goal: Cell,
    offset: Cell,
    dims: (usize, usize),
    radius: i64,
    field: DistanceField,
}

pub struct Episode {
    scene: Scene,
    cfg: EpisodeConfig,
    sim: SimState,
    refine: RefineFrame,
    /// Agent-frame maps built from estimated poses; `None` until first scan.
    agent_maps: Vec<Option<OccGrid>>,
    /// Scene-aligned maps from true poses; ground truth for coverage.
    truth: Vec<OccGrid>,
    merged: OccGrid,
    planner: Box<dyn GlobalPlanner>,
    planner_rng: ChaCha8Rng,
    goals: Vec<Option<Point>>,
    nav_cache: Vec<Option<NavCache>>,
    /// World lattice cells where a Forward failed to move the agent; kept
    /// out of that agent's traversable mask only.
    bumps: Vec<BTreeSet<Cell>>,
    coverage: Vec<f64>,
    goal_log: Vec<GoalLogEntry>,
    overlap_at_event: Option<Option<f64>>,
}

impl Episode {
    /// Resets the simulator and integrates the initial scans.
    pub fn new(scene: Scene, cfg: EpisodeConfig) -> Result<Self, EpisodeError> {
        let sim = SimState::reset(&scene, cfg.schedule, cfg.sim, cfg.seed)?;
        let n = sim.agents.len();
        let res = scene.resolution();
        let bounds = CellRect {
            x0: 0,
            y0: 0,
            x1: scene.width() as i64 - 1,
            y1: scene.height() as i64 - 1,
        };
        let refine = RefineFrame::new(sim.agents.iter().map(|a| a.birth_pose).collect(), Some(bounds));
        let planner = make_planner(cfg.planner, &cfg.planner_params);
        // a separate stream so planner draws never perturb the simulator's
        let planner_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x005E_ED0F_91A7);
        let mut ep = Episode {
            merged: OccGrid::world(bounds, res),
            truth: vec![OccGrid::world(bounds, res); n],
            agent_maps: vec![None; n],
            goals: vec![None; n],
            nav_cache: (0..n).map(|_| None).collect(),
            bumps: vec![BTreeSet::new(); n],
            scene,
            cfg,
            sim,
            refine,
            planner,
            planner_rng,
            coverage: Vec::new(),
            goal_log: Vec::new(),
            overlap_at_event: None,
        };
        let scans = ep.sim.sense_all(&ep.scene)?;
        ep.integrate(&scans)?;
        Ok(ep)
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.cfg
    }

    pub fn sim(&self) -> &SimState {
        &self.sim
    }

    pub fn t(&self) -> u64 {
        self.sim.t
    }

    pub fn is_done(&self) -> bool {
        self.sim.t >= self.cfg.length
    }

    pub fn merged(&self) -> &OccGrid {
        &self.merged
    }

    pub fn agent_map(&self, id: usize) -> Option<&OccGrid> {
        self.agent_maps.get(id).and_then(|m| m.as_ref())
    }

    /// Agent `id`'s map in the world frame.
    pub fn refined_map(&self, id: usize) -> Option<OccGrid> {
        self.agent_map(id).and_then(|m| refine_map(m, &self.refine).ok())
    }

    pub fn truth_grid(&self, id: usize) -> &Grid<f64> {
        &self.truth[id].explored
    }

    pub fn coverage_trace(&self) -> &[f64] {
        &self.coverage
    }

    pub fn goal(&self, id: usize) -> Option<Point> {
        self.goals[id]
    }

    pub fn goal_log(&self) -> &[GoalLogEntry] {
        &self.goal_log
    }

    /// Ground-truth explored free area per agent, m².
    pub fn agent_areas(&self) -> Vec<f64> {
        let a = self.scene.resolution().powi(2);
        self.truth
            .iter()
            .map(|m| self.free_explored(|c| m.explored[c] >= 0.5) as f64 * a)
            .collect()
    }

    /// Ground-truth explored free area of the team, m².
    pub fn team_area(&self) -> f64 {
        let a = self.scene.resolution().powi(2);
        self.free_explored(|c| self.truth.iter().any(|m| m.explored[c] >= 0.5)) as f64 * a
    }

    pub fn coverage_ratio(&self) -> f64 {
        self.free_explored(|c| self.truth.iter().any(|m| m.explored[c] >= 0.5)) as f64
            / self.scene.free_cell_count() as f64
    }

    fn free_explored(&self, seen: impl Fn(Cell) -> bool) -> usize {
        self.scene
            .grid()
            .cells()
            .filter(|c| self.scene.is_free(*c) && seen(*c))
            .count()
    }

    fn integrate(&mut self, scans: &[(usize, LocalScan)]) -> Result<(), EpisodeError> {
        let res = self.scene.resolution();
        for (id, scan) in scans {
            let agent = &self.sim.agents[*id];
            let birth = agent.birth_pose;
            let est = agent.est_pose;
            let map = self.agent_maps[*id].get_or_insert_with(|| OccGrid::for_agent(*id, birth, res));
            integrate_scan(map, scan, Pose::new(est.x - birth.x, est.y - birth.y, est.theta));
            let truth = &mut self.truth[*id];
            integrate_scan(truth, scan, agent.true_pose);
            // hits past the scene edge grow the grid; keep it scene-aligned
            if (truth.width(), truth.height()) != (self.scene.width(), self.scene.height()) {
                *truth = truth.crop_world(CellRect {
                    x0: 0,
                    y0: 0,
                    x1: self.scene.width() as i64 - 1,
                    y1: self.scene.height() as i64 - 1,
                });
            }
        }
        let refined = self
            .agent_maps
            .iter()
            .flatten()
            .map(|m| refine_map(m, &self.refine))
            .collect::<Result<Vec<_>, _>>()?;
        if !refined.is_empty() {
            self.merged = merge_maps(&refined.iter().collect::<Vec<_>>())?;
        }
        Ok(())
    }

    /// Assigns goals (world points) to agents; others keep theirs.
    pub fn set_goals(&mut self, goals: &[(usize, Point)]) {
        for (id, g) in goals {
            self.goals[*id] = Some(*g);
            self.nav_cache[*id] = None;
            let cell = self.merged.cell_of(*g);
            let off = self.merged.lattice_offset();
            self.goal_log.push(GoalLogEntry {
                t: self.sim.t,
                agent: *id,
                cell: Cell::new(cell.x + off.x, cell.y + off.y),
            });
        }
    }

    /// Runs the global planner for the listed agents (all active when
    /// `only` is `None`) on the current merged map.
    pub fn replan(&mut self, only: Option<&[usize]>) {
        let active = self.sim.active_ids();
        if active.is_empty() {
            return;
        }
        let agents = active
            .iter()
            .map(|&id| {
                let a = &self.sim.agents[id];
                AgentView {
                    id,
                    pose: a.est_pose,
                    trajectory: &a.trajectory,
                    previous_goal: self.goals[id].map(|g| self.merged.cell_of(g)),
                }
            })
            .collect();
        let mut ctx = PlannerContext {
            merged: &self.merged,
            agents,
            rng: &mut self.planner_rng,
            timestep: self.sim.t,
        };
        let cells = plan_with_fallback(self.planner.as_mut(), &mut ctx);
        let goals: Vec<(usize, Point)> = active
            .iter()
            .zip(cells)
            .filter(|(id, _)| only.is_none_or(|o| o.contains(id)))
            .map(|(id, c)| (*id, self.merged.center_of(c)))
            .collect();
        self.set_goals(&goals);
    }

    /// One simulator step with the built-in planner: replans every
    /// [`REPLAN_PERIOD`] steps (and immediately for agents without a goal).
    pub fn tick(&mut self) -> Result<(), EpisodeError> {
        if self.is_done() {
            return Err(EpisodeError::EpisodeDone(self.sim.t));
        }
        if self.sim.t.is_multiple_of(REPLAN_PERIOD) {
            self.replan(None);
        } else {
            let missing: Vec<usize> = self
                .sim
                .active_ids()
                .into_iter()
                .filter(|id| self.goals[*id].is_none())
                .collect();
            if !missing.is_empty() {
                self.replan(Some(&missing));
            }
        }
        self.step()
    }

    /// One simulator step toward the current goals.
    pub fn step(&mut self) -> Result<(), EpisodeError> {
        if self.is_done() {
            return Err(EpisodeError::EpisodeDone(self.sim.t));
        }
        let mut masks: HashMap<i64, TraversableMask> = HashMap::new();
        let actions: Vec<Action> = self
            .sim
            .active_ids()
            .into_iter()
            .map(|id| self.nav_action(id, &mut masks))
            .collect();
        let before: Vec<Pose> = self.sim.agents.iter().map(|a| a.est_pose).collect();
        let ids = self.sim.active_ids();
        let scans = self.sim.step(&self.scene, &actions)?;
        for (id, action) in ids.into_iter().zip(&actions) {
            let moved = self.sim.agents[id].est_pose.position().dist(before[id].position());
            if *action == Action::Forward && moved < BUMP_MOVE_M {
                self.record_bump(id, before[id]);
            }
        }
        self.integrate(&scans)?;
        let ratio = self.coverage_ratio();
        self.coverage.push(ratio);
        if self.overlap_at_event.is_none() && ratio >= COVERAGE_EVENT {
            self.overlap_at_event = Some(self.current_overlap());
        }
        Ok(())
    }

    fn current_overlap(&self) -> Option<f64> {
        let grids: Vec<&Grid<f64>> = self
            .agent_maps
            .iter()
            .zip(&self.truth)
            .filter(|(m, _)| m.is_some())
            .map(|(_, t)| &t.explored)
            .collect();
        mutual_overlap(&grids, &self.scene).ok()
    }

    /// Marks the strip just ahead of `pose` as blocked for agent `id`.
    fn record_bump(&mut self, id: usize, pose: Pose) {
        let res = self.merged.resolution;
        let (s, c) = pose.theta.sin_cos();
        let step = self.cfg.sim.motion.forward_m;
        let mut d = res;
        while d <= step + 1e-9 {
            for lateral in [-res, 0.0, res] {
                let x = pose.x + d * c - lateral * s;
                let y = pose.y + d * s + lateral * c;
                let cell = Cell::new((x / res).floor() as i64, (y / res).floor() as i64);
                if cell != self.world_cell(pose.position()) {
                    self.bumps[id].insert(cell);
                }
            }
            d += res;
        }
        self.nav_cache[id] = None;
    }

    fn world_cell(&self, p: Point) -> Cell {
        let res = self.merged.resolution;
        Cell::new((p.x / res).floor() as i64, (p.y / res).floor() as i64)
    }

    fn mask<'a>(&self, masks: &'a mut HashMap<i64, TraversableMask>, r: i64) -> &'a TraversableMask {
        masks
            .entry(r)
            .or_insert_with(|| dilate_obstacles(&self.merged, r, self.cfg.nav.unexplored_penalty))
    }

    fn nav_action(&mut self, id: usize, masks: &mut HashMap<i64, TraversableMask>) -> Action {
        let est = self.sim.agents[id].est_pose;
        let Some(goal) = self.goals[id] else {
            return Action::TurnLeft;
        };
        if est.position().dist(goal) < self.cfg.goal_reach_m {
            return Action::TurnLeft;
        }
        let merged = &self.merged;
        let here = merged.cell_of(est.position());
        let goal_cell = merged.cell_of(goal);
        let offset = merged.lattice_offset();
        let dims = (merged.width(), merged.height());

        let valid = match &self.nav_cache[id] {
            Some(c) if c.goal == goal_cell && c.offset == offset && c.dims == dims => {
                let mask = self.mask(masks, c.radius);
                let bumps = &self.bumps[id];
                path_start(&c.field, here)
                    .and_then(|s| plan_path(&c.field, s).ok())
                    .map(|p| {
                        p[1..].iter().all(|q| {
                            mask.is_traversable(*q) && !bumps.contains(&Cell::new(q.x + offset.x, q.y + offset.y))
                        })
                    })
                    .unwrap_or(false)
            }
            _ => false,
        };
        if !valid {
            self.nav_cache[id] = self.build_nav(id, here, goal_cell, masks);
        }
        let target = match &self.nav_cache[id] {
            Some(c) => match path_start(&c.field, here).map(|s| plan_path(&c.field, s)) {
                Some(Ok(path)) => self.clear_subgoal(id, est.position(), &path),
                _ => goal,
            },
            None => goal,
        };
        local_controller(est, target, &self.cfg.nav)
    }

    /// The lookahead subgoal, pulled back along the path until the straight
    /// segment to it crosses no mapped obstacle or bumped cell; failing
    /// that, the first path cell outside the arrival radius.
    fn clear_subgoal(&self, id: usize, from: Point, path: &[Cell]) -> Point {
        let m = &self.merged;
        let off = m.lattice_offset();
        let far = next_subgoal(path, self.cfg.nav.lookahead_m, m);
        let k = path.iter().position(|c| m.center_of(*c) == far).unwrap_or(0);
        let blocked = |c: Cell| {
            m.obstacle.get(c).is_none_or(|o| *o >= THRESHOLD) || self.bumps[id].contains(&Cell::new(c.x + off.x, c.y + off.y))
        };
        let arrive = self.cfg.nav.arrive_radius_m;
        let ahead: Vec<Point> = (1..=k).map(|i| m.center_of(path[i])).filter(|p| p.dist(from) > arrive).collect();
        ahead
            .iter()
            .rev()
            .find(|p| !traverse(from, **p, m.origin, m.resolution).any(|x| blocked(x.cell)))
            .or(ahead.first())
            .copied()
            .unwrap_or(far)
    }

    /// Agent-specific mask: bumped cells blocked, the agent's own cell open.
    fn agent_mask(&self, id: usize, r: i64, here: Cell, masks: &mut HashMap<i64, TraversableMask>) -> TraversableMask {
        let offset = self.merged.lattice_offset();
        let mut mask = self.mask(masks, r).clone();
        for b in &self.bumps[id] {
            if let Some(t) = mask.traversable.get_mut(Cell::new(b.x - offset.x, b.y - offset.y)) {
                *t = false;
            }
        }
        if let Some(t) = mask.traversable.get_mut(here) {
            *t = true;
        }
        mask
    }

    /// Field toward the goal at the widest clearance that connects; when
    /// none does, toward the reachable cell closest to the goal.
    fn build_nav(
        &self,
        id: usize,
        here: Cell,
        goal_cell: Cell,
        masks: &mut HashMap<i64, TraversableMask>,
    ) -> Option<NavCache> {
        let merged = &self.merged;
        let cache = |radius, field| NavCache {
            goal: goal_cell,
            offset: merged.lattice_offset(),
            dims: (merged.width(), merged.height()),
            radius,
            field,
        };
        let top = self.cfg.nav.dilation_radius;
        let mut radii = vec![top, 1, 0];
        radii.retain(|r| *r <= top);
        radii.dedup();
        for r in &radii {
            let mask = self.agent_mask(id, *r, here, masks);
            let Some(source) = mask.nearest_traversable(goal_cell) else { continue };
            let Ok(field) = fmm_field(&mask, source) else { continue };
            if field.value(here).is_finite() {
                return Some(cache(*r, field));
            }
        }
        let g = merged.center_of(goal_cell);
        let mut best: Option<(f64, i64, Cell, TraversableMask)> = None;
        for r in &radii {
            let mask = self.agent_mask(id, *r, here, masks);
            let Ok(from_here) = fmm_field(&mask, here) else { continue };
            let near = from_here
                .values
                .iter()
                .filter(|(c, v)| v.is_finite() && *c != here)
                .map(|(c, _)| (merged.center_of(c).dist(g), c))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let Some((d, c)) = near {
                if best.as_ref().is_none_or(|b| d < b.0) {
                    best = Some((d, *r, c, mask));
                }
            }
        }
        let (_, r, source, mask) = best?;
        fmm_field(&mask, source).ok().map(|f| cache(r, f))
    }

    /// Runs to the configured length with the built-in planner.
    pub fn run(mut self) -> Result<EpisodeRecord, EpisodeError> {
        while !self.is_done() {
            self.tick()?;
        }
        Ok(self.into_record())
    }

    pub fn into_record(self) -> EpisodeRecord {
        let overlap = match self.overlap_at_event {
            Some(v) => v,
            None => self.current_overlap(),
        };
        EpisodeRecord {
            scene: self.scene.name().to_string(),
            planner: self.cfg.planner.to_string(),
            schedule: self.cfg.schedule.to_string(),
            seed: self.cfg.seed,
            length: self.cfg.length,
            steps_to_90: steps_to_threshold(&self.coverage, COVERAGE_EVENT, self.cfg.length),
            final_coverage: self.coverage.last().copied().unwrap_or_else(|| self.coverage_ratio()),
            coverage: self.coverage,
            mutual_overlap: overlap,
            goals: self.goal_log,
        }
    }
}

/// `here` when the field reaches it, else its best reached 8-neighbour;
/// absorbs estimated-pose jitter across a cell boundary.
fn path_start(field: &DistanceField, here: Cell) -> Option<Cell> {
    if field.value(here).is_finite() {
        return Some(here);
    }
    here.neighbors8()
        .into_iter()
        .filter(|n| field.value(*n).is_finite())
        .min_by(|a, b| field.value(*a).total_cmp(&field.value(*b)).then(a.cmp(b)))
}
