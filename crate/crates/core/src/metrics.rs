//! Coverage, steps-to-threshold and mutual overlap.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Cell;
use crate::grid::Grid;
use crate::mapping::{OccGrid, THRESHOLD};
use crate::scene::{explorable_area, Scene};

/// Pairwise explored-probability sum above which a cell counts as overlap.
pub const OVERLAP_SUM: f64 = 1.2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("mutual overlap needs at least two agents")]
    SingleAgent,
    #[error("grid is {got:?}, scene is {want:?}")]
    ShapeMismatch { got: (usize, usize), want: (usize, usize) },
}

/// Fraction of the scene's free cells explored on a world-frame map.
pub fn coverage_ratio(merged: &OccGrid, scene: &Scene) -> f64 {
    let off = merged.lattice_offset();
    let seen = scene
        .grid()
        .cells()
        .filter(|c| scene.is_free(*c))
        .filter(|c| merged.is_explored(Cell::new(c.x - off.x, c.y - off.y)))
        .count();
    seen as f64 / scene.free_cell_count() as f64
}

/// Fraction of free cells set in any of the scene-aligned grids.
pub fn union_coverage(grids: &[&Grid<f64>], scene: &Scene) -> f64 {
    let seen = scene
        .grid()
        .cells()
        .filter(|c| scene.is_free(*c) && grids.iter().any(|g| g[*c] >= THRESHOLD))
        .count();
    seen as f64 / scene.free_cell_count() as f64
}

/// First 1-based step whose coverage is at least `threshold`; `cap` when
/// the trace never gets there.
pub fn steps_to_threshold(trace: &[f64], threshold: f64, cap: u64) -> u64 {
    trace
        .iter()
        .position(|r| *r >= threshold)
        .map(|i| (i as u64 + 1).min(cap))
        .unwrap_or(cap)
}

/// Mean over unordered agent pairs of the free area both explored,
/// normalized by the scene's explorable area. Grids are aligned with the
/// scene grid and hold explored probabilities.
pub fn mutual_overlap(grids: &[&Grid<f64>], scene: &Scene) -> Result<f64, MetricsError> {
    if grids.len() < 2 {
        return Err(MetricsError::SingleAgent);
    }
    let want = (scene.width(), scene.height());
    for g in grids {
        if (g.width(), g.height()) != want {
            return Err(MetricsError::ShapeMismatch { got: (g.width(), g.height()), want });
        }
    }
    let free: Vec<Cell> = scene.grid().cells().filter(|c| scene.is_free(*c)).collect();
    let cell_area = scene.resolution() * scene.resolution();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..grids.len() {
        for j in i + 1..grids.len() {
            let n = free
                .iter()
                .filter(|c| grids[i][**c] + grids[j][**c] > OVERLAP_SUM)
                .count();
            total += n as f64 * cell_area;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64 / explorable_area(scene))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalLogEntry {
    pub t: u64,
    pub agent: usize,
    /// World lattice cell.
    pub cell: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub scene: String,
    pub planner: String,
    pub schedule: String,
    pub seed: u64,
    pub length: u64,
    /// Coverage ratio after each simulator step.
    pub coverage: Vec<f64>,
    pub steps_to_90: u64,
    pub final_coverage: f64,
    /// At the first step coverage reached 90% (or at the end of the episode
    /// if it never did); `None` when only one agent was ever active.
    pub mutual_overlap: Option<f64>,
    pub goals: Vec<GoalLogEntry>,
}
