use serde::{Deserialize, Serialize};

use super::simple::bfs_steps;
use super::{explored_free, FrontierView, GlobalPlanner, PlanError, PlannerContext, PlannerKind};
use crate::frontier::{cluster_frontiers, is_frontier, FrontierCluster};
use crate::geometry::{Cell, Point};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApfParams {
    /// Teammate influence radius, meters.
    pub influence_m: f64,
    pub k_d: f64,
    pub c_repeat: f64,
    pub max_iters: usize,
}

impl Default for ApfParams {
    fn default() -> Self {
        ApfParams {
            influence_m: 2.0,
            k_d: 1.0,
            c_repeat: 0.1,
            max_iters: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApfTrace {
    pub goal: Cell,
    /// Cells in visit order, starting at the agent cell.
    pub path: Vec<Cell>,
    pub visits: Grid<u32>,
}

/// Attraction toward every cluster: `-w_c / dis`, with `dis` the BFS travel
/// distance in meters (at least half a cell). Infinite outside `domain`.
fn attraction(view: &FrontierView, domain: &Grid<bool>, clusters: &[FrontierCluster]) -> Grid<f64> {
    let res = view.map.resolution;
    let mut f = domain.map(|d| if *d { 0.0 } else { f64::INFINITY });
    for c in clusters {
        let steps = bfs_steps(domain, c.center);
        for (cell, s) in steps.iter() {
            if *s != u32::MAX {
                let dis = (*s as f64).max(0.5) * res;
                f[cell] -= c.weight as f64 / dis;
            }
        }
    }
    f
}

/// Potential-field descent for one agent given its teammates' positions.
pub fn apf_descent(
    view: &FrontierView,
    start: Cell,
    teammates: &[Point],
    params: &ApfParams,
) -> Result<ApfTrace, PlanError> {
    let map = &view.map;
    let clusters = cluster_frontiers(&view.frontiers);
    if clusters.is_empty() {
        return Err(PlanError::NoFrontier);
    }
    let mut domain = map.explored.map(|_| false);
    for c in map.explored.cells() {
        domain[c] = explored_free(map, c);
    }
    if !map.contains(start) {
        return Err(PlanError::NoCandidates);
    }
    domain[start] = true;
    let base = attraction(view, &domain, &clusters);
    Ok(descend(view, &domain, base, start, teammates, params))
}

fn descend(
    view: &FrontierView,
    domain: &Grid<bool>,
    mut f: Grid<f64>,
    start: Cell,
    teammates: &[Point],
    params: &ApfParams,
) -> ApfTrace {
    let map = &view.map;
    let d = params.influence_m;
    let r = (d / map.resolution).ceil() as i64;
    for loc in teammates {
        let lc = map.cell_of(*loc);
        for dy in -r..=r {
            for dx in -r..=r {
                let c = lc.offset(dx, dy);
                if !domain.get(c).copied().unwrap_or(false) {
                    continue;
                }
                let dist = map.center_of(c).dist(*loc);
                if dist < d {
                    f[c] += params.k_d * (d - dist);
                }
            }
        }
    }
    let mut visits = domain.map(|_| 0u32);
    let mut path = vec![start];
    let mut u = start;
    let mut cnt = 0;
    while !is_frontier(map, u) && cnt < params.max_iters {
        let best = u
            .neighbors8()
            .into_iter()
            .filter(|n| domain.get(*n).copied().unwrap_or(false))
            .min_by(|a, b| f[*a].total_cmp(&f[*b]).then(a.cmp(b)));
        let Some(next) = best else { break };
        // strict local minimum: every neighbour is higher
        if f[u] < f[next] {
            break;
        }
        cnt += 1;
        f[u] += params.c_repeat;
        visits[u] += 1;
        u = next;
        path.push(u);
    }
    ApfTrace { goal: u, path, visits }
}

pub struct ApfPlanner {
    params: ApfParams,
}

impl ApfPlanner {
    pub fn new(params: ApfParams) -> Self {
        ApfPlanner { params }
    }
}

impl GlobalPlanner for ApfPlanner {
    fn kind(&self) -> PlannerKind {
        PlannerKind::Apf
    }

    fn plan(&mut self, ctx: &mut PlannerContext) -> Vec<Result<Cell, PlanError>> {
        let positions = ctx.positions();
        let view = FrontierView::new(ctx.merged, &positions);
        let clusters = cluster_frontiers(&view.frontiers);
        if clusters.is_empty() {
            return vec![Err(PlanError::NoFrontier); positions.len()];
        }
        let map = &view.map;
        let mut domain = map.explored.map(|_| false);
        for c in map.explored.cells() {
            domain[c] = explored_free(map, c);
        }
        let agent_cells: Vec<Cell> = (0..positions.len()).map(|i| ctx.agent_cell(i)).collect();
        for c in &agent_cells {
            if let Some(d) = domain.get_mut(*c) {
                *d = true;
            }
        }
        let base = attraction(&view, &domain, &clusters);
        (0..positions.len())
            .map(|i| {
                if !map.contains(agent_cells[i]) {
                    return Err(PlanError::NoCandidates);
                }
                let others: Vec<Point> = positions
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, p)| *p)
                    .collect();
                Ok(descend(&view, &domain, base.clone(), agent_cells[i], &others, &self.params).goal)
            })
            .collect()
    }
}
