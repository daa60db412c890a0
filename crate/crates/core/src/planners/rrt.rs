use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FrontierView, GlobalPlanner, PlanError, PlannerContext, PlannerKind};
use crate::frontier::cluster_cells;
use crate::geometry::{traverse, Cell, Point};
use crate::mapping::{OccGrid, THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RrtParams {
    pub step_m: f64,
    pub max_iters: usize,
    pub n_targets: usize,
}

impl Default for RrtParams {
    fn default() -> Self {
        RrtParams {
            step_m: 0.75,
            max_iters: 2000,
            n_targets: 30,
        }
    }
}

/// Rooted tree of world points. Lock and completion flags are only used by
/// the weighted multi-agent variant; `locked_until[i]` guards the edge from
/// `parent[i]` to `i`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RrtTree {
    pub nodes: Vec<Point>,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    pub created: Vec<u64>,
    pub locked_until: Vec<u64>,
    pub completed: Vec<bool>,
}

impl RrtTree {
    pub fn with_root(root: Point, t: u64) -> Self {
        let mut tree = RrtTree::default();
        tree.push(root, None, t);
        tree
    }

    pub fn push(&mut self, p: Point, parent: Option<usize>, t: u64) -> usize {
        let id = self.nodes.len();
        self.nodes.push(p);
        self.parent.push(parent);
        self.children.push(Vec::new());
        self.created.push(t);
        self.locked_until.push(t);
        self.completed.push(false);
        if let Some(par) = parent {
            self.children[par].push(id);
        }
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nearest(&self, p: Point) -> usize {
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = (n.x - p.x).powi(2) + (n.y - p.y).powi(2);
            if d < bd {
                bd = d;
                best = i;
            }
        }
        best
    }
}

pub(crate) fn steer(s: Point, p: Point, step: f64) -> Point {
    let d = s.dist(p);
    if d <= step {
        p
    } else {
        Point::new(s.x + (p.x - s.x) * step / d, s.y + (p.y - s.y) * step / d)
    }
}

/// True when every cell the segment touches is on the map and not a known
/// obstacle.
pub(crate) fn segment_clear(map: &OccGrid, s: Point, t: Point) -> bool {
    let ok = |c: Cell| map.obstacle.get(c).is_some_and(|o| *o < THRESHOLD);
    traverse(s, t, map.origin, map.resolution).all(|x| ok(x.cell)) && ok(map.cell_of(t))
}

pub(crate) fn sample_point(map: &OccGrid, rng: &mut ChaCha8Rng) -> Point {
    let w = map.width() as f64 * map.resolution;
    let h = map.height() as f64 * map.resolution;
    Point::new(
        map.origin.x + rng.random::<f64>() * w,
        map.origin.y + rng.random::<f64>() * h,
    )
}

/// Grows a tree from `root`. Collision-free extensions ending on unexplored
/// cells of `view_map` become targets; the rest join the tree.
pub fn grow_rrt(
    merged: &OccGrid,
    view_map: &OccGrid,
    root: Point,
    params: &RrtParams,
    rng: &mut ChaCha8Rng,
) -> (RrtTree, Vec<Point>) {
    let mut tree = RrtTree::with_root(root, 0);
    let mut targets = Vec::new();
    let mut i = 0;
    while i < params.max_iters && targets.len() < params.n_targets {
        i += 1;
        let p = sample_point(merged, rng);
        let s = tree.nearest(p);
        let t = steer(tree.nodes[s], p, params.step_m);
        if !segment_clear(merged, tree.nodes[s], t) {
            continue;
        }
        if view_map.is_explored(view_map.cell_of(t)) {
            tree.push(t, Some(s), 0);
        } else {
            targets.push(t);
        }
    }
    (tree, targets)
}

fn normalize(v: &[f64], degenerate: f64) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        v.iter().map(|x| (x - lo) / (hi - lo)).collect()
    } else {
        vec![degenerate; v.len()]
    }
}

/// Index maximizing normalized gain minus normalized distance. With no
/// spread a term is pinned (gain 1, distance 0). Ties go to the first.
pub fn select_by_utility(gains: &[f64], dists: &[f64]) -> Option<usize> {
    let g = normalize(gains, 1.0);
    let d = normalize(dists, 0.0);
    let mut best: Option<(f64, usize)> = None;
    for i in 0..g.len() {
        let u = g[i] - d[i];
        if best.is_none_or(|(bu, _)| u > bu) {
            best = Some((u, i));
        }
    }
    best.map(|(_, i)| i)
}

pub struct RrtPlanner {
    params: RrtParams,
}

impl RrtPlanner {
    pub fn new(params: RrtParams) -> Self {
        RrtPlanner { params }
    }
}

impl GlobalPlanner for RrtPlanner {
    fn kind(&self) -> PlannerKind {
        PlannerKind::Rrt
    }

    fn plan(&mut self, ctx: &mut PlannerContext) -> Vec<Result<Cell, PlanError>> {
        let view = FrontierView::new(ctx.merged, &ctx.positions());
        let mut out = Vec::with_capacity(ctx.agents.len());
        for a in 0..ctx.agents.len() {
            let loc = ctx.agents[a].pose.position();
            let (_, targets) = grow_rrt(ctx.merged, &view.map, loc, &self.params, ctx.rng);
            if targets.is_empty() {
                out.push(Err(PlanError::NoCandidates));
                continue;
            }
            let mut cells: Vec<Cell> = targets.iter().map(|p| ctx.merged.cell_of(*p)).collect();
            cells.sort();
            cells.dedup();
            let clusters = cluster_cells(&cells);
            let gains: Vec<f64> = clusters.iter().map(|c| view.gain.gain(c.center) as f64).collect();
            let dists: Vec<f64> = clusters
                .iter()
                .map(|c| ctx.merged.center_of(c.center).dist(loc))
                .collect();
            let k = select_by_utility(&gains, &dists).expect("non-empty clusters");
            out.push(Ok(clusters[k].center));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::CellRect;
    use rand::SeedableRng;

    #[test]
    fn nearer_cluster_wins_at_equal_gain() {
        assert_eq!(select_by_utility(&[40.0, 40.0], &[3.0, 1.0]), Some(1));
        assert_eq!(select_by_utility(&[7.0], &[2.0]), Some(0));
        assert_eq!(select_by_utility(&[], &[]), None);
        // gain dominates when distance is equal
        assert_eq!(select_by_utility(&[10.0, 50.0], &[2.0, 2.0]), Some(1));
    }

    #[test]
    fn steer_clamps_to_step() {
        let t = steer(Point::new(0.0, 0.0), Point::new(3.0, 4.0), 0.75);
        assert!((t.dist(Point::new(0.0, 0.0)) - 0.75).abs() < 1e-12);
        let p = Point::new(0.1, 0.1);
        assert_eq!(steer(Point::new(0.0, 0.0), p, 0.75), p);
    }

    #[test]
    fn boxed_in_agent_has_no_targets() {
        let mut m = OccGrid::world(CellRect { x0: 0, y0: 0, x1: 39, y1: 39 }, 0.05);
        m.explored.fill(1.0);
        m.obstacle.fill(1.0);
        let root = Cell::new(20, 20);
        m.obstacle[root] = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (tree, targets) = grow_rrt(&m, &m, m.center_of(root), &RrtParams::default(), &mut rng);
        assert!(targets.is_empty());
        assert_eq!(tree.len(), 1 + tree.nodes[1..].len());
        assert!(tree.nodes.iter().all(|p| m.cell_of(*p) == root));
    }
}
