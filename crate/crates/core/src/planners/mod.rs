//! Global planners. Each replan tick every active agent receives a goal cell
//! on the merged world-frame map.

mod apf;
mod rrt;
mod simple;
mod wma;

pub use apf::{apf_descent, ApfParams, ApfPlanner, ApfTrace};
pub use rrt::{grow_rrt, select_by_utility, RrtParams, RrtPlanner, RrtTree};
pub use simple::{
    nearest_goal, random_goal, utility_goal, voronoi_owner, NearestPlanner, RandomPlanner,
    UtilityPlanner, VoronoiPlanner,
};
pub use wma::{WmaParams, WmaPhase, WmaPlanner};

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontier::{detect_frontiers, virtual_explore_all, Frontier, GainField};
use crate::geometry::{Cell, Point, Pose};
use crate::mapping::{OccGrid, THRESHOLD};

/// Simulator steps between global replans.
pub const REPLAN_PERIOD: u64 = 15;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum PlanError {
    #[error("no candidate goal")]
    NoCandidates,
    #[error("no frontier on the map")]
    NoFrontier,
    #[error("unknown planner {0:?}")]
    UnknownPlanner(&'static str),
}

#[derive(Debug, Clone, Copy)]
pub struct AgentView<'a> {
    pub id: usize,
    /// Estimated pose in the world frame.
    pub pose: Pose,
    pub trajectory: &'a [Pose],
    pub previous_goal: Option<Cell>,
}

pub struct PlannerContext<'a> {
    pub merged: &'a OccGrid,
    /// Active agents in id order.
    pub agents: Vec<AgentView<'a>>,
    pub rng: &'a mut ChaCha8Rng,
    pub timestep: u64,
}

impl PlannerContext<'_> {
    pub fn agent_cell(&self, i: usize) -> Cell {
        self.merged.cell_of(self.agents[i].pose.position())
    }

    pub fn positions(&self) -> Vec<Point> {
        self.agents.iter().map(|a| a.pose.position()).collect()
    }
}

/// The merged map with 2.5 m virtually explored around every active agent,
/// its frontiers and a gain lookup. Shared by the frontier-based planners.
pub struct FrontierView {
    pub map: OccGrid,
    pub frontiers: Vec<Frontier>,
    pub gain: GainField,
}

impl FrontierView {
    pub fn new(merged: &OccGrid, positions: &[Point]) -> Self {
        let map = virtual_explore_all(merged, positions);
        let frontiers = detect_frontiers(&map);
        let gain = GainField::new(&map);
        FrontierView { map, frontiers, gain }
    }
}

/// Goal cells must lie on the map and not on a known obstacle.
pub fn is_goal_cell(map: &OccGrid, c: Cell) -> bool {
    map.obstacle.get(c).is_some_and(|o| *o < THRESHOLD)
}

pub(crate) fn explored_free(map: &OccGrid, c: Cell) -> bool {
    map.explored.get(c).is_some_and(|e| *e >= THRESHOLD) && is_goal_cell(map, c)
}

/// Nearest goal-eligible cell to `c`, ties row-major.
pub fn snap_to_traversable(map: &OccGrid, c: Cell) -> Option<Cell> {
    if is_goal_cell(map, c) {
        return Some(c);
    }
    map.obstacle
        .iter()
        .filter(|(_, o)| **o < THRESHOLD)
        .map(|(cell, _)| cell)
        .min_by_key(|cell| (cell.dist2(c), *cell))
}

pub trait GlobalPlanner: Send {
    fn kind(&self) -> PlannerKind;

    /// One result per agent in `ctx.agents`.
    fn plan(&mut self, ctx: &mut PlannerContext) -> Vec<Result<Cell, PlanError>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    Random,
    Nearest,
    Utility,
    Rrt,
    Apf,
    WmaRrt,
    Voronoi,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 7] = [
        PlannerKind::Random,
        PlannerKind::Nearest,
        PlannerKind::Utility,
        PlannerKind::Rrt,
        PlannerKind::Apf,
        PlannerKind::WmaRrt,
        PlannerKind::Voronoi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Random => "random",
            PlannerKind::Nearest => "nearest",
            PlannerKind::Utility => "utility",
            PlannerKind::Rrt => "rrt",
            PlannerKind::Apf => "apf",
            PlannerKind::WmaRrt => "wma-rrt",
            PlannerKind::Voronoi => "voronoi",
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        PlannerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown planner {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlannerParams {
    pub rrt: RrtParams,
    pub apf: ApfParams,
    pub wma: WmaParams,
}

pub fn make_planner(kind: PlannerKind, params: &PlannerParams) -> Box<dyn GlobalPlanner> {
    match kind {
        PlannerKind::Random => Box::new(RandomPlanner),
        PlannerKind::Nearest => Box::new(NearestPlanner),
        PlannerKind::Utility => Box::new(UtilityPlanner),
        PlannerKind::Rrt => Box::new(RrtPlanner::new(params.rrt)),
        PlannerKind::Apf => Box::new(ApfPlanner::new(params.apf)),
        PlannerKind::WmaRrt => Box::new(WmaPlanner::new(params.wma, params.rrt)),
        PlannerKind::Voronoi => Box::new(VoronoiPlanner),
    }
}

/// Runs `planner` and repairs failures per agent with nearest, then random,
/// then the agent's own cell, so an episode never stalls.
pub fn plan_with_fallback(planner: &mut dyn GlobalPlanner, ctx: &mut PlannerContext) -> Vec<Cell> {
    let primary = planner.plan(ctx);
    let mut view = None;
    primary
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let goal = r.or_else(|_| {
                let v = view.get_or_insert_with(|| FrontierView::new(ctx.merged, &ctx.positions()));
                nearest_goal(v, ctx.agent_cell(i))
            });
            let goal = goal.or_else(|_| random_goal(ctx.merged, ctx.rng));
            let own = ctx.agent_cell(i);
            goal.ok()
                .and_then(|g| snap_to_traversable(ctx.merged, g))
                .or_else(|| snap_to_traversable(ctx.merged, own))
                .unwrap_or(own)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in PlannerKind::ALL {
            assert_eq!(k.name().parse::<PlannerKind>().unwrap(), k);
            assert_eq!(make_planner(k, &PlannerParams::default()).kind(), k);
        }
        assert!("msp".parse::<PlannerKind>().is_err());
    }
}
