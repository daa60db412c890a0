use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use super::{NavError, TraversableMask};
use crate::geometry::Cell;
use crate::grid::Grid;

/// Travel distance in meters from `source`; `f64::INFINITY` where unreachable.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub values: Grid<f64>,
    pub source: Cell,
    pub traversable: Grid<bool>,
    pub resolution: f64,
}

impl DistanceField {
    pub fn value(&self, c: Cell) -> f64 {
        self.values.get(c).copied().unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Trial {
    value: f64,
    index: usize,
}

impl Eq for Trial {}

impl Ord for Trial {
    // min-heap on value, ties by index for a deterministic pop order
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .value
            .total_cmp(&self.value)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Trial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// First-order fast marching on the 8-neighbourhood: each trial value is the
/// smallest upwind solution over the eight triangles formed by an axis
/// neighbour and an adjacent diagonal one, or a single-neighbour step.
pub fn fmm_field(mask: &TraversableMask, source: Cell) -> Result<DistanceField, NavError> {
    if !mask.is_traversable(source) {
        return Err(NavError::SourceBlocked(source));
    }
    let grid = &mask.traversable;
    let mut values = Grid::filled(grid.width(), grid.height(), f64::INFINITY);
    let mut known = Grid::filled(grid.width(), grid.height(), false);
    let mut heap = BinaryHeap::new();
    let src = grid.index(source).expect("traversable implies in bounds");
    values.as_mut_slice()[src] = 0.0;
    heap.push(Trial { value: 0.0, index: src });

    while let Some(Trial { value, index }) = heap.pop() {
        if known.as_slice()[index] || value > values.as_slice()[index] {
            continue;
        }
        known.as_mut_slice()[index] = true;
        let cell = grid.cell_at(index);
        for n in cell.neighbors8() {
            let Some(ni) = grid.index(n) else { continue };
            if known.as_slice()[ni] || !grid.as_slice()[ni] {
                continue;
            }
            let h = mask.resolution * mask.cost.as_slice()[ni];
            let candidate = update(&values, &known, n, h);
            if candidate < values.as_slice()[ni] {
                values.as_mut_slice()[ni] = candidate;
                heap.push(Trial { value: candidate, index: ni });
            }
        }
    }
    Ok(DistanceField {
        values,
        source,
        traversable: grid.clone(),
        resolution: mask.resolution,
    })
}

fn known_value(values: &Grid<f64>, known: &Grid<bool>, c: Cell) -> f64 {
    match values.index(c) {
        Some(i) if known.as_slice()[i] => values.as_slice()[i],
        _ => f64::INFINITY,
    }
}

fn update(values: &Grid<f64>, known: &Grid<bool>, c: Cell, h: f64) -> f64 {
    let v = |dx, dy| known_value(values, known, c.offset(dx, dy));
    let mut best = f64::INFINITY;
    for (ax, ay) in [(1, 0), (0, 1), (-1, 0), (0, -1)] {
        let a = v(ax, ay);
        best = best.min(a + h);
        // the two diagonals flanking this axis neighbour
        for (dx, dy) in [(ax - ay, ay + ax), (ax + ay, ay - ax)] {
            let d = v(dx, dy);
            best = best.min(d + h * SQRT_2).min(solve_triangle(a, d, h));
        }
    }
    best
}

/// Update across the right triangle formed by an axis neighbour (value `a`)
/// and the adjacent diagonal neighbour (`d`); infinite when the
/// characteristic does not pass through the triangle.
fn solve_triangle(a: f64, d: f64, h: f64) -> f64 {
    if !a.is_finite() || !d.is_finite() || d > a {
        return f64::INFINITY;
    }
    let g = a - d;
    if g * SQRT_2 > h {
        return f64::INFINITY;
    }
    let t = a + (h * h - g * g).sqrt();
    if g <= t - a {
        t
    } else {
        f64::INFINITY
    }
}
