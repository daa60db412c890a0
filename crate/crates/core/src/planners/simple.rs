use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    explored_free, FrontierView, GlobalPlanner, PlanError, PlannerContext, PlannerKind,
};
use crate::frontier::is_frontier;
use crate::geometry::Cell;
use crate::grid::Grid;
use crate::mapping::OccGrid;

/// Uniform draw over explored free cells.
pub fn random_goal(map: &OccGrid, rng: &mut ChaCha8Rng) -> Result<Cell, PlanError> {
    let cells: Vec<Cell> = map.explored.cells().filter(|c| explored_free(map, *c)).collect();
    if cells.is_empty() {
        return Err(PlanError::NoCandidates);
    }
    Ok(cells[rng.random_range(0..cells.len())])
}

/// Breadth-first search over explored free cells of the virtual map; the
/// first frontier reached wins, row-major among equal depth.
pub fn nearest_goal(view: &FrontierView, start: Cell) -> Result<Cell, PlanError> {
    let map = &view.map;
    if !map.contains(start) {
        return Err(PlanError::NoFrontier);
    }
    let mut seen = Grid::filled(map.width(), map.height(), false);
    seen[start] = true;
    let mut layer = vec![start];
    while !layer.is_empty() {
        if let Some(best) = layer.iter().filter(|c| is_frontier(map, **c)).min() {
            return Ok(*best);
        }
        let mut next = Vec::new();
        for c in &layer {
            for n in c.neighbors4() {
                if explored_free(map, n) && !seen[n] {
                    seen[n] = true;
                    next.push(n);
                }
            }
        }
        layer = next;
    }
    Err(PlanError::NoFrontier)
}

/// BFS step counts from `start` over `domain` (4-connected).
pub(crate) fn bfs_steps(domain: &Grid<bool>, start: Cell) -> Grid<u32> {
    let mut dist = Grid::filled(domain.width(), domain.height(), u32::MAX);
    if !domain.contains(start) {
        return dist;
    }
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        let d = dist[c];
        for n in c.neighbors4() {
            if domain.get(n).copied().unwrap_or(false) && dist[n] == u32::MAX {
                dist[n] = d + 1;
                queue.push_back(n);
            }
        }
    }
    dist
}

/// Frontier of maximum gain among `candidates` (row-major ties).
fn argmax_gain<'a>(view: &FrontierView, candidates: impl Iterator<Item = &'a Cell>) -> Option<Cell> {
    let mut best: Option<(usize, Cell)> = None;
    for c in candidates {
        let g = view.gain.gain(*c);
        if best.is_none_or(|(bg, _)| g > bg) {
            best = Some((g, *c));
        }
    }
    best.map(|(_, c)| c)
}

pub fn utility_goal(view: &FrontierView) -> Result<Cell, PlanError> {
    argmax_gain(view, view.frontiers.iter().map(|f| &f.cell)).ok_or(PlanError::NoFrontier)
}

/// Index of the agent nearest to `c`; ties go to the lower index.
pub fn voronoi_owner(c: Cell, agent_cells: &[Cell]) -> usize {
    agent_cells
        .iter()
        .enumerate()
        .min_by_key(|(i, a)| (a.dist2(c), *i))
        .map(|(i, _)| i)
        .expect("at least one agent")
}

pub struct RandomPlanner;

impl GlobalPlanner for RandomPlanner {
    fn kind(&self) -> PlannerKind {
        PlannerKind::Random
    }

    fn plan(&mut self, ctx: &mut PlannerContext) -> Vec<Result<Cell, PlanError>> {
        (0..ctx.agents.len()).map(|_| random_goal(ctx.merged, ctx.rng)).collect()
    }
}

pub struct NearestPlanner;

impl GlobalPlanner for NearestPlanner {
    fn kind(&self) -> PlannerKind {
        PlannerKind::Nearest
    }

    fn plan(&mut self, ctx: &mut PlannerContext) -> Vec<Result<Cell, PlanError>> {
        let view = FrontierView::new(ctx.merged, &ctx.positions());
        (0..ctx.agents.len()).map(|i| nearest_goal(&view, ctx.agent_cell(i))).collect()
    }
}

pub struct UtilityPlanner;

impl GlobalPlanner for UtilityPlanner {
    fn kind(&self) -> PlannerKind {
        PlannerKind::Utility
    }

    fn plan(&mut self, ctx: &mut PlannerContext) -> Vec<Result<Cell, PlanError>> {
        let view = FrontierView::new(ctx.merged, &ctx.positions());
        let goal = utility_goal(&view);
        vec![goal; ctx.agents.len()]
    }
}

pub struct VoronoiPlanner;

impl GlobalPlanner for VoronoiPlanner {
    fn kind(&self) -> PlannerKind {
        PlannerKind::Voronoi
    }

    fn plan(&mut self, ctx: &mut PlannerContext) -> Vec<Result<Cell, PlanError>> {
        let view = FrontierView::new(ctx.merged, &ctx.positions());
        let agent_cells: Vec<Cell> = (0..ctx.agents.len()).map(|i| ctx.agent_cell(i)).collect();
        let owners: Vec<usize> = view
            .frontiers
            .iter()
            .map(|f| voronoi_owner(f.cell, &agent_cells))
            .collect();
        (0..ctx.agents.len())
            .map(|i| {
                let own = view
                    .frontiers
                    .iter()
                    .zip(&owners)
                    .filter(|(_, o)| **o == i)
                    .map(|(f, _)| &f.cell);
                argmax_gain(&view, own)
                    .map(Ok)
                    .unwrap_or_else(|| utility_goal(&view))
            })
            .collect()
    }
}
