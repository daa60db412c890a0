//! Frontier detection, virtual exploration, information gain and clustering.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{Cell, Point};
use crate::grid::Grid;
use crate::mapping::{OccGrid, THRESHOLD};

/// Radius, in meters, that is virtually marked explored around an agent.
pub const VIRTUAL_RADIUS_M: f64 = 2.5;
/// Radius, in meters, over which unexplored cells count towards gain.
pub const GAIN_RADIUS_M: f64 = 1.5;
/// Single-linkage distance, cells.
pub const LINKAGE_CELLS: i64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frontier {
    pub cell: Cell,
    pub cluster_id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontierCluster {
    pub center: Cell,
    /// Row-major.
    pub members: Vec<Cell>,
    pub weight: usize,
}

fn radius_cells(meters: f64, resolution: f64) -> i64 {
    (meters / resolution + 1e-9).floor() as i64
}

/// Copy of `map` with every cell whose center lies within 2.5 m (inclusive,
/// measured in whole cells from the pose's cell) marked explored.
pub fn virtual_explore(map: &OccGrid, pose: Point) -> OccGrid {
    let mut out = map.clone();
    mark_disk(&mut out, pose);
    out
}

/// [`virtual_explore`] around several positions at once.
pub fn virtual_explore_all(map: &OccGrid, poses: &[Point]) -> OccGrid {
    let mut out = map.clone();
    for p in poses {
        mark_disk(&mut out, *p);
    }
    out
}

fn mark_disk(map: &mut OccGrid, pose: Point) {
    let r = radius_cells(VIRTUAL_RADIUS_M, map.resolution);
    let c = map.cell_of(pose);
    for dy in -r..=r {
        let half = ((r * r - dy * dy) as f64).sqrt().floor() as i64;
        for dx in -half..=half {
            if let Some(e) = map.explored.get_mut(c.offset(dx, dy)) {
                *e = 1.0;
            }
        }
    }
}

fn explored_free(map: &OccGrid, c: Cell) -> bool {
    map.explored.get(c).is_some_and(|e| *e >= THRESHOLD)
        && map.obstacle.get(c).is_some_and(|o| *o < THRESHOLD)
}

fn unexplored(map: &OccGrid, c: Cell) -> bool {
    map.explored.get(c).is_some_and(|e| *e < THRESHOLD)
}

pub fn is_frontier(map: &OccGrid, c: Cell) -> bool {
    explored_free(map, c) && c.neighbors4().into_iter().any(|n| unexplored(map, n))
}

/// Frontier cells in row-major order.
pub fn detect_frontiers(map: &OccGrid) -> Vec<Frontier> {
    map.explored
        .cells()
        .filter(|c| is_frontier(map, *c))
        .map(|cell| Frontier { cell, cluster_id: None })
        .collect()
}

/// Number of in-map unexplored cells within 1.5 m of `cell`.
pub fn information_gain(map: &OccGrid, cell: Cell) -> usize {
    let r = radius_cells(GAIN_RADIUS_M, map.resolution);
    let mut n = 0;
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r && unexplored(map, cell.offset(dx, dy)) {
                n += 1;
            }
        }
    }
    n
}

/// Row prefix sums of unexplored cells, for evaluating the gain of many
/// cells in O(radius) each.
#[derive(Debug, Clone)]
pub struct GainField {
    prefix: Grid<u32>,
    spans: Vec<i64>,
}

impl GainField {
    pub fn new(map: &OccGrid) -> Self {
        let (w, h) = (map.width(), map.height());
        // prefix[x + 1] holds the count of cells 0..=x in the row
        let mut prefix = Grid::filled(w + 1, h, 0u32);
        for y in 0..h as i64 {
            let mut acc = 0;
            for x in 0..w as i64 {
                if unexplored(map, Cell::new(x, y)) {
                    acc += 1;
                }
                prefix[Cell::new(x + 1, y)] = acc;
            }
        }
        let r = radius_cells(GAIN_RADIUS_M, map.resolution);
        let spans = (-r..=r)
            .map(|dy| ((r * r - dy * dy) as f64).sqrt().floor() as i64)
            .collect();
        GainField { prefix, spans }
    }

    pub fn gain(&self, cell: Cell) -> usize {
        let r = (self.spans.len() as i64 - 1) / 2;
        let (w, h) = (self.prefix.width() as i64 - 1, self.prefix.height() as i64);
        let mut n = 0u32;
        for (i, half) in self.spans.iter().enumerate() {
            let y = cell.y + i as i64 - r;
            if y < 0 || y >= h {
                continue;
            }
            let lo = (cell.x - half).max(0);
            let hi = (cell.x + half).min(w - 1);
            if lo > hi {
                continue;
            }
            n += self.prefix[Cell::new(hi + 1, y)] - self.prefix[Cell::new(lo, y)];
        }
        n as usize
    }
}

/// Single-linkage clustering at [`LINKAGE_CELLS`]. Clusters are ordered by
/// their first member; each center is the member nearest the centroid,
/// ties row-major.
pub fn cluster_frontiers(frontiers: &[Frontier]) -> Vec<FrontierCluster> {
    let cells: Vec<Cell> = frontiers.iter().map(|f| f.cell).collect();
    cluster_cells(&cells)
}

pub fn cluster_cells(cells: &[Cell]) -> Vec<FrontierCluster> {
    let n = cells.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let l = LINKAGE_CELLS;
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, c) in cells.iter().enumerate() {
        buckets.entry((c.x.div_euclid(l), c.y.div_euclid(l))).or_default().push(i);
    }
    for (i, c) in cells.iter().enumerate() {
        let (bx, by) = (c.x.div_euclid(l), c.y.div_euclid(l));
        for oy in -1..=1 {
            for ox in -1..=1 {
                let Some(bucket) = buckets.get(&(bx + ox, by + oy)) else { continue };
                for &j in bucket {
                    if j > i && c.dist2(cells[j]) <= l * l {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
    }
    let mut groups: Vec<(Cell, Vec<Cell>)> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        let k = *slot.entry(root).or_insert_with(|| {
            groups.push((cells[i], Vec::new()));
            groups.len() - 1
        });
        groups[k].1.push(cells[i]);
    }
    for g in &mut groups {
        g.1.sort();
        g.0 = g.1[0];
    }
    groups.sort_by_key(|g| g.0);
    groups
        .into_iter()
        .map(|(_, mut members)| {
            members.dedup();
            let m = members.len() as f64;
            let cx = members.iter().map(|c| c.x as f64).sum::<f64>() / m;
            let cy = members.iter().map(|c| c.y as f64).sum::<f64>() / m;
            let center = *members
                .iter()
                .min_by(|a, b| {
                    let da = (a.x as f64 - cx).powi(2) + (a.y as f64 - cy).powi(2);
                    let db = (b.x as f64 - cx).powi(2) + (b.y as f64 - cy).powi(2);
                    da.total_cmp(&db).then(a.cmp(b))
                })
                .expect("non-empty cluster");
            FrontierCluster {
                center,
                weight: members.len(),
                members,
            }
        })
        .collect()
}

/// Frontiers annotated with the index of their cluster.
pub fn label_frontiers(frontiers: &[Frontier], clusters: &[FrontierCluster]) -> Vec<Frontier> {
    let mut label = HashMap::new();
    for (k, cl) in clusters.iter().enumerate() {
        for m in &cl.members {
            label.insert(*m, k);
        }
    }
    frontiers
        .iter()
        .map(|f| Frontier {
            cell: f.cell,
            cluster_id: label.get(&f.cell).copied(),
        })
        .collect()
}
