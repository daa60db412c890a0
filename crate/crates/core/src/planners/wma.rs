use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::rrt::{sample_point, segment_clear, steer};
use super::{GlobalPlanner, PlanError, PlannerContext, PlannerKind, RrtParams, RrtTree};
use crate::geometry::{Cell, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WmaParams {
    /// Simulator steps an edge stays locked once taken.
    pub lock_time: u64,
    /// Agents must all be within this distance of their mean to leave the
    /// gather stage, meters.
    pub gather_m: f64,
    /// Tree extension iterations per replan tick.
    pub extend_iters: usize,
}

impl Default for WmaParams {
    fn default() -> Self {
        WmaParams {
            lock_time: 15,
            gather_m: 1.0,
            extend_iters: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WmaPhase {
    Gather,
    Explore,
}

/// Bearing of `to` seen from `from`, clockwise from north (+y).
fn clockwise_from_north(from: Point, to: Point) -> f64 {
    let a = (to.x - from.x).atan2(to.y - from.y);
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

impl RrtTree {
    /// Walks down from `a` along the first unlocked, uncompleted child edge
    /// in clockwise order, locking each edge taken. Returns the leaf reached,
    /// or, when `a` is exhausted, marks it completed and returns its parent.
    pub fn find_next_point(&mut self, mut a: usize, t: u64, lock_time: u64) -> usize {
        loop {
            if self.children[a].is_empty() {
                return a;
            }
            let here = self.nodes[a];
            let mut kids = self.children[a].clone();
            kids.sort_by(|x, y| {
                clockwise_from_north(here, self.nodes[*x])
                    .total_cmp(&clockwise_from_north(here, self.nodes[*y]))
                    .then(x.cmp(y))
            });
            let open = kids
                .into_iter()
                .find(|b| self.locked_until[*b] <= t && !self.completed[*b]);
            match open {
                Some(b) => {
                    self.locked_until[b] = t + lock_time;
                    a = b;
                }
                None => {
                    self.completed[a] = true;
                    return self.parent[a].unwrap_or(a);
                }
            }
        }
    }
}

pub struct WmaPlanner {
    params: WmaParams,
    rrt: RrtParams,
    pub phase: WmaPhase,
    pub tree: RrtTree,
    /// Current tree node per agent id.
    pub agent_node: BTreeMap<usize, usize>,
}

impl WmaPlanner {
    pub fn new(params: WmaParams, rrt: RrtParams) -> Self {
        WmaPlanner {
            params,
            rrt,
            phase: WmaPhase::Gather,
            tree: RrtTree::default(),
            agent_node: BTreeMap::new(),
        }
    }

    fn extend(&mut self, ctx: &mut PlannerContext) {
        for _ in 0..self.params.extend_iters {
            let p = sample_point(ctx.merged, ctx.rng);
            let s = self.tree.nearest(p);
            let t = steer(self.tree.nodes[s], p, self.rrt.step_m);
            if segment_clear(ctx.merged, self.tree.nodes[s], t) {
                self.tree.push(t, Some(s), ctx.timestep);
            }
        }
    }
}

impl GlobalPlanner for WmaPlanner {
    fn kind(&self) -> PlannerKind {
        PlannerKind::WmaRrt
    }

    fn plan(&mut self, ctx: &mut PlannerContext) -> Vec<Result<Cell, PlanError>> {
        let positions = ctx.positions();
        if positions.is_empty() {
            return Vec::new();
        }
        let n = positions.len() as f64;
        let mean = Point::new(
            positions.iter().map(|p| p.x).sum::<f64>() / n,
            positions.iter().map(|p| p.y).sum::<f64>() / n,
        );
        if self.phase == WmaPhase::Gather {
            if positions.iter().any(|p| p.dist(mean) > self.params.gather_m) {
                return vec![Ok(ctx.merged.cell_of(mean)); positions.len()];
            }
            self.tree = RrtTree::with_root(mean, ctx.timestep);
            for (a, p) in ctx.agents.iter().zip(&positions) {
                let node = self.tree.push(*p, Some(0), ctx.timestep);
                self.agent_node.insert(a.id, node);
            }
            self.phase = WmaPhase::Explore;
        } else {
            self.extend(ctx);
        }
        let t = ctx.timestep;
        let mut goals = Vec::with_capacity(positions.len());
        for (a, p) in ctx.agents.iter().zip(&positions) {
            let node = match self.agent_node.get(&a.id) {
                Some(n) => *n,
                None => {
                    // late joiner: hang it off the nearest node
                    let near = self.tree.nearest(*p);
                    self.tree.push(*p, Some(near), t)
                }
            };
            let mut next = self.tree.find_next_point(node, t, self.params.lock_time);
            if next == node && self.tree.children[node].is_empty() {
                // already standing on this leaf: it has been visited
                self.tree.completed[node] = true;
                next = self.tree.parent[node].unwrap_or(node);
            }
            self.agent_node.insert(a.id, next);
            goals.push(Ok(ctx.merged.cell_of(self.tree.nodes[next])));
        }
        goals
    }
}
