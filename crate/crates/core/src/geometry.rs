//! Grid cells, planar poses and segment traversal over square lattices.

use std::cmp::Ordering;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

/// Integer grid coordinate: `x` is the column, `y` the row.
///
/// Ordering is row-major (`y` first, then `x`), which is the tie-break order
/// used everywhere a "first" cell has to be picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: i64,
    pub y: i64,
}

impl Cell {
    pub const fn new(x: i64, y: i64) -> Self {
        Cell { x, y }
    }

    pub fn offset(self, dx: i64, dy: i64) -> Self {
        Cell::new(self.x + dx, self.y + dy)
    }

    pub fn dist2(self, other: Cell) -> i64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(self, other: Cell) -> f64 {
        (self.dist2(other) as f64).sqrt()
    }

    pub fn neighbors4(self) -> [Cell; 4] {
        [
            self.offset(0, -1),
            self.offset(-1, 0),
            self.offset(1, 0),
            self.offset(0, 1),
        ]
    }

    pub fn neighbors8(self) -> [Cell; 8] {
        [
            self.offset(-1, -1),
            self.offset(0, -1),
            self.offset(1, -1),
            self.offset(-1, 0),
            self.offset(1, 0),
            self.offset(-1, 1),
            self.offset(0, 1),
            self.offset(1, 1),
        ]
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Planar pose. `theta` is kept in `[0, 2π)`, measured from +x towards +y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// Maps an angle into `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Maps an angle into `(-π, π]`.
pub fn wrap_to_pi(theta: f64) -> f64 {
    let t = normalize_angle(theta);
    if t > PI {
        t - TAU
    } else {
        t
    }
}

/// Cell containing a point on a lattice with the given origin (corner of
/// cell (0,0)) and resolution.
pub fn point_to_cell(p: Point, origin: Point, resolution: f64) -> Cell {
    Cell::new(
        ((p.x - origin.x) / resolution).floor() as i64,
        ((p.y - origin.y) / resolution).floor() as i64,
    )
}

/// Center of a lattice cell in meters.
pub fn cell_center(c: Cell, origin: Point, resolution: f64) -> Point {
    Point::new(
        origin.x + (c.x as f64 + 0.5) * resolution,
        origin.y + (c.y as f64 + 0.5) * resolution,
    )
}

/// One cell visited by [`traverse`], with the fraction of the segment at
/// which the segment enters it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub cell: Cell,
    pub t_enter: f64,
}

/// Voxel traversal (Amanatides & Woo) of the half-open segment `[from, to)`
/// over a lattice. Cells are produced in order along the segment; the first
/// one contains `from` and has `t_enter == 0`. When the segment passes exactly
/// through a lattice corner the x step is taken first, so consecutive cells
/// are always 4-adjacent.
pub fn traverse(from: Point, to: Point, origin: Point, resolution: f64) -> Traversal {
    let ux = (from.x - origin.x) / resolution;
    let uy = (from.y - origin.y) / resolution;
    let dx = (to.x - from.x) / resolution;
    let dy = (to.y - from.y) / resolution;
    let cell = Cell::new(ux.floor() as i64, uy.floor() as i64);
    Traversal {
        cell,
        x: Axis::new(ux, dx),
        y: Axis::new(uy, dy),
        started: false,
        done: false,
    }
}

/// Boundary crossings along one axis. Crossing times are recomputed from the
/// boundary coordinate each time so they do not accumulate rounding error.
#[derive(Debug, Clone)]
struct Axis {
    start: f64,
    delta: f64,
    step: i64,
    next_boundary: f64,
}

impl Axis {
    fn new(u: f64, d: f64) -> Self {
        let step = if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        };
        let next_boundary = if step > 0 { u.floor() + 1.0 } else { u.floor() };
        Axis {
            start: u,
            delta: d,
            step,
            next_boundary,
        }
    }

    fn t_next(&self) -> f64 {
        if self.step == 0 {
            f64::INFINITY
        } else {
            (self.next_boundary - self.start) / self.delta
        }
    }

    fn advance(&mut self) {
        self.next_boundary += self.step as f64;
    }
}

#[derive(Debug, Clone)]
pub struct Traversal {
    cell: Cell,
    x: Axis,
    y: Axis,
    started: bool,
    done: bool,
}

impl Iterator for Traversal {
    type Item = Crossing;

    fn next(&mut self) -> Option<Crossing> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(Crossing {
                cell: self.cell,
                t_enter: 0.0,
            });
        }
        let (tx, ty) = (self.x.t_next(), self.y.t_next());
        let t_next = tx.min(ty);
        if t_next >= 1.0 {
            self.done = true;
            return None;
        }
        if tx <= ty {
            self.cell.x += self.x.step;
            self.x.advance();
        } else {
            self.cell.y += self.y.step;
            self.y.advance();
        }
        Some(Crossing {
            cell: self.cell,
            t_enter: t_next,
        })
    }
}
