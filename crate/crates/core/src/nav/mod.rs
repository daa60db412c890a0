//! Local navigation: obstacle dilation, fast-marching distance fields,
//! steepest-descent paths, sub-goal extraction and a rule-based controller.

mod controller;
mod fmm;
mod path;

pub use controller::local_controller;
pub use fmm::{fmm_field, DistanceField};
pub use path::{next_subgoal, path_length, plan_path};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Cell;
use crate::grid::Grid;
use crate::mapping::OccGrid;

#[derive(Debug, Error, PartialEq)]
pub enum NavError {
    #[error("source cell {0:?} is not traversable")]
    SourceBlocked(Cell),
    #[error("no path from {0:?}")]
    NoPath(Cell),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavParams {
    /// Chebyshev inflation of obstacles, cells.
    pub dilation_radius: i64,
    /// Extra travel cost per meter through unexplored cells.
    pub unexplored_penalty: f64,
    pub lookahead_m: f64,
    pub bearing_threshold_rad: f64,
    /// Sub-goals closer than this make the controller turn in place.
    pub arrive_radius_m: f64,
}

impl Default for NavParams {
    fn default() -> Self {
        NavParams {
            dilation_radius: 2,
            unexplored_penalty: 0.0,
            lookahead_m: 0.5,
            bearing_threshold_rad: 15f64.to_radians(),
            arrive_radius_m: 0.05,
        }
    }
}

/// Cells a path may use, plus the per-cell travel cost multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct TraversableMask {
    pub traversable: Grid<bool>,
    pub cost: Grid<f64>,
    pub resolution: f64,
}

impl TraversableMask {
    /// Uniform-cost mask.
    pub fn from_bools(traversable: Grid<bool>, resolution: f64) -> Self {
        let cost = traversable.map(|_| 1.0);
        TraversableMask {
            traversable,
            cost,
            resolution,
        }
    }

    pub fn is_traversable(&self, c: Cell) -> bool {
        self.traversable.get(c).copied().unwrap_or(false)
    }

    pub fn width(&self) -> usize {
        self.traversable.width()
    }

    pub fn height(&self) -> usize {
        self.traversable.height()
    }

    /// Nearest traversable cell to `c` by Euclidean distance, ties
    /// row-major. `None` when nothing is traversable.
    pub fn nearest_traversable(&self, c: Cell) -> Option<Cell> {
        if self.is_traversable(c) {
            return Some(c);
        }
        self.traversable
            .iter()
            .filter(|(_, t)| **t)
            .map(|(cell, _)| cell)
            .min_by_key(|cell| (cell.dist2(c), *cell))
    }
}

/// A cell is traversable when no obstacle lies within Chebyshev `radius`.
/// Unexplored cells stay traversable so that paths can end beside unknown
/// space; they carry `1 + unexplored_penalty` travel cost.
pub fn dilate_obstacles(map: &OccGrid, radius: i64, unexplored_penalty: f64) -> TraversableMask {
    let (w, h) = (map.width(), map.height());
    let mut traversable = Grid::filled(w, h, true);
    for (c, v) in map.obstacle.iter() {
        if *v < crate::mapping::THRESHOLD {
            continue;
        }
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                if let Some(t) = traversable.get_mut(c.offset(dx, dy)) {
                    *t = false;
                }
            }
        }
    }
    let cost = map
        .explored
        .map(|e| if *e >= crate::mapping::THRESHOLD { 1.0 } else { 1.0 + unexplored_penalty });
    TraversableMask {
        traversable,
        cost,
        resolution: map.resolution,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::CellRect;

    fn map(w: i64, h: i64) -> OccGrid {
        OccGrid::world(CellRect { x0: 0, y0: 0, x1: w - 1, y1: h - 1 }, 0.05)
    }

    #[test]
    fn radius_zero_is_free_space() {
        let mut m = map(8, 8);
        m.explored.fill(1.0);
        m.obstacle[Cell::new(2, 3)] = 1.0;
        m.obstacle[Cell::new(5, 5)] = 0.7;
        let mask = dilate_obstacles(&m, 0, 0.0);
        for c in m.explored.cells() {
            assert_eq!(mask.is_traversable(c), m.is_known_free(c), "{c:?}");
        }
    }

    #[test]
    fn single_obstacle_inflates_to_square() {
        let mut m = map(11, 11);
        m.explored.fill(1.0);
        m.obstacle[Cell::new(5, 5)] = 1.0;
        let mask = dilate_obstacles(&m, 2, 0.0);
        let blocked: Vec<Cell> = mask
            .traversable
            .iter()
            .filter(|(_, t)| !**t)
            .map(|(c, _)| c)
            .collect();
        assert_eq!(blocked.len(), 25);
        assert!(blocked.iter().all(|c| (c.x - 5).abs() <= 2 && (c.y - 5).abs() <= 2));
    }

    #[test]
    fn unexplored_map_is_open() {
        let mask = dilate_obstacles(&map(6, 4), 2, 0.5);
        assert!(mask.traversable.as_slice().iter().all(|t| *t));
        assert!(mask.cost.as_slice().iter().all(|c| *c == 1.5));
    }

    #[test]
    fn nearest_traversable_prefers_row_major() {
        let mut t = Grid::filled(5, 5, false);
        t[Cell::new(2, 1)] = true;
        t[Cell::new(1, 2)] = true;
        let mask = TraversableMask::from_bools(t, 0.05);
        assert_eq!(mask.nearest_traversable(Cell::new(2, 2)), Some(Cell::new(2, 1)));
        let none = TraversableMask::from_bools(Grid::filled(2, 2, false), 0.05);
        assert_eq!(none.nearest_traversable(Cell::new(0, 0)), None);
    }
}
