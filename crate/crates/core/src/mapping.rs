//! Per-agent occupancy maps, alignment into the shared world frame, and
//! per-cell max fusion.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{cell_center, point_to_cell, traverse, Cell, Point, Pose};
use crate::grid::Grid;
use crate::scene::CellRect;
use crate::sim::{Hit, LocalScan};

/// Probability at or above which a channel counts as set.
pub const THRESHOLD: f64 = 0.5;
/// Cells of slack kept around the cropped region.
pub const CROP_MARGIN: i64 = 5;
const GROW_PAD: i64 = 16;
const RAY_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("map has no explored cell")]
    EmptyMap,
    #[error("maps do not share a frame: {0}")]
    FrameMismatch(String),
    #[error("no maps to merge")]
    NoMaps,
    #[error("unknown agent {0} for refinement")]
    UnknownAgent(usize),
}

/// Coordinate frame a map is expressed in. Agent frames are translated by
/// that agent's birth position relative to the world frame, axes parallel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MapFrame {
    World,
    Agent(usize),
}

/// Two-channel probabilistic grid. `origin` is the corner of cell (0,0) in
/// the map's frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccGrid {
    pub explored: Grid<f64>,
    pub obstacle: Grid<f64>,
    pub origin: Point,
    pub resolution: f64,
    pub frame: MapFrame,
}

impl OccGrid {
    pub fn new(frame: MapFrame, origin: Point, resolution: f64, width: usize, height: usize) -> Self {
        OccGrid {
            explored: Grid::filled(width, height, 0.0),
            obstacle: Grid::filled(width, height, 0.0),
            origin,
            resolution,
            frame,
        }
    }

    /// Empty map in an agent frame whose lattice lines up with the world
    /// lattice once translated by `birth`.
    pub fn for_agent(agent: usize, birth: Pose, resolution: f64) -> Self {
        let corner = |b: f64| (b / resolution).floor() * resolution - b;
        OccGrid::new(
            MapFrame::Agent(agent),
            Point::new(corner(birth.x), corner(birth.y)),
            resolution,
            0,
            0,
        )
    }

    /// World-frame map covering world cells `rect`.
    pub fn world(rect: CellRect, resolution: f64) -> Self {
        OccGrid::new(
            MapFrame::World,
            Point::new(rect.x0 as f64 * resolution, rect.y0 as f64 * resolution),
            resolution,
            (rect.x1 - rect.x0 + 1).max(0) as usize,
            (rect.y1 - rect.y0 + 1).max(0) as usize,
        )
    }

    pub fn width(&self) -> usize {
        self.explored.width()
    }

    pub fn height(&self) -> usize {
        self.explored.height()
    }

    pub fn contains(&self, c: Cell) -> bool {
        self.explored.contains(c)
    }

    pub fn cell_of(&self, p: Point) -> Cell {
        point_to_cell(p, self.origin, self.resolution)
    }

    pub fn center_of(&self, c: Cell) -> Point {
        cell_center(c, self.origin, self.resolution)
    }

    /// Position of local cell (0,0) on the frame's lattice.
    pub fn lattice_offset(&self) -> Cell {
        Cell::new(
            (self.origin.x / self.resolution).round() as i64,
            (self.origin.y / self.resolution).round() as i64,
        )
    }

    pub fn is_explored(&self, c: Cell) -> bool {
        self.explored.get(c).is_some_and(|v| *v >= THRESHOLD)
    }

    pub fn is_obstacle(&self, c: Cell) -> bool {
        self.obstacle.get(c).is_some_and(|v| *v >= THRESHOLD)
    }

    /// Explored and not an obstacle.
    pub fn is_known_free(&self, c: Cell) -> bool {
        self.is_explored(c) && !self.is_obstacle(c)
    }

    pub fn explored_count(&self) -> usize {
        self.explored.as_slice().iter().filter(|v| **v >= THRESHOLD).count()
    }

    pub fn cell_area(&self) -> f64 {
        self.resolution * self.resolution
    }

    /// Marks a cell in both channels; grows the grid when needed.
    fn mark(&mut self, c: Cell, obstacle: bool) {
        let c = self.grow_to(c);
        self.explored[c] = 1.0;
        if obstacle {
            self.obstacle[c] = 1.0;
        }
    }

    /// Grows the grid so that `c` (in current local coordinates) is inside;
    /// returns `c` re-expressed after any shift of the origin.
    fn grow_to(&mut self, c: Cell) -> Cell {
        if self.contains(c) {
            return c;
        }
        let (w, h) = (self.width() as i64, self.height() as i64);
        let pad = |needed: i64| if needed > 0 { needed + GROW_PAD } else { 0 };
        let left = pad(-c.x);
        let top = pad(-c.y);
        let right = pad(c.x - (w - 1));
        let bottom = pad(c.y - (h - 1));
        self.resize(left, top, right, bottom);
        c.offset(left, top)
    }

    fn resize(&mut self, left: i64, top: i64, right: i64, bottom: i64) {
        let (w, h) = (self.width() as i64, self.height() as i64);
        let (nw, nh) = ((w + left + right) as usize, (h + top + bottom) as usize);
        let mut explored = Grid::filled(nw, nh, 0.0);
        let mut obstacle = Grid::filled(nw, nh, 0.0);
        for c in self.explored.cells() {
            let d = c.offset(left, top);
            explored[d] = self.explored[c];
            obstacle[d] = self.obstacle[c];
        }
        self.explored = explored;
        self.obstacle = obstacle;
        self.origin = Point::new(
            self.origin.x - left as f64 * self.resolution,
            self.origin.y - top as f64 * self.resolution,
        );
    }

    /// Copy of the world cells `rect` (lattice coordinates); cells outside
    /// this map read as unexplored.
    pub fn crop_world(&self, rect: CellRect) -> OccGrid {
        let mut out = OccGrid::world(rect, self.resolution);
        let off = self.lattice_offset();
        for c in out.explored.cells().collect::<Vec<_>>() {
            let src = Cell::new(c.x + rect.x0 - off.x, c.y + rect.y0 - off.y);
            if let (Some(e), Some(o)) = (self.explored.get(src), self.obstacle.get(src)) {
                out.explored[c] = *e;
                out.obstacle[c] = *o;
            }
        }
        out
    }

    /// World-lattice bounding box of explored cells.
    pub fn explored_bounds(&self) -> Option<CellRect> {
        let off = self.lattice_offset();
        let mut rect: Option<CellRect> = None;
        for (c, v) in self.explored.iter() {
            if *v < THRESHOLD {
                continue;
            }
            let (x, y) = (c.x + off.x, c.y + off.y);
            rect = Some(match rect {
                None => CellRect { x0: x, y0: y, x1: x, y1: y },
                Some(r) => CellRect {
                    x0: r.x0.min(x),
                    y0: r.y0.min(y),
                    x1: r.x1.max(x),
                    y1: r.y1.max(y),
                },
            });
        }
        rect
    }

    /// Writes the explored and obstacle channels as binary PGM images.
    pub fn write_pgm_pair(&self, explored: &Path, obstacle: &Path) -> std::io::Result<()> {
        write_pgm(&self.explored, explored)?;
        write_pgm(&self.obstacle, obstacle)
    }
}

fn write_pgm(grid: &Grid<f64>, path: &Path) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{} {}\n255\n", grid.width(), grid.height())?;
    let bytes: Vec<u8> = grid
        .as_slice()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    f.write_all(&bytes)?;
    f.flush()
}

/// Marks every cell crossed by each ray as explored, and the terminal cell of
/// obstacle hits as an obstacle. `pose` must be in the map's frame.
pub fn integrate_scan(map: &mut OccGrid, scan: &LocalScan, pose: Pose) {
    let from = pose.position();
    for ray in &scan.rays {
        let (s, c) = (pose.theta + ray.bearing).sin_cos();
        let reach = (ray.range - RAY_EPS).max(0.0);
        let to = Point::new(from.x + reach * c, from.y + reach * s);
        // collect first: marking may grow the grid and move the origin
        let crossed: Vec<Point> = traverse(from, to, map.origin, map.resolution)
            .map(|cr| map.center_of(cr.cell))
            .collect();
        for p in crossed {
            let cell = map.cell_of(p);
            map.mark(cell, false);
        }
        if ray.hit == Hit::Obstacle {
            let beyond = ray.range + RAY_EPS;
            let hit = Point::new(from.x + beyond * c, from.y + beyond * s);
            let cell = map.cell_of(hit);
            map.mark(cell, true);
        }
    }
}

/// Frame and crop information shared by every agent's refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineFrame {
    pub birth_poses: Vec<Pose>,
    /// World cells the team could ever explore; kept inside the crop.
    pub bounds: Option<CellRect>,
    pub margin: i64,
}

impl RefineFrame {
    pub fn new(birth_poses: Vec<Pose>, bounds: Option<CellRect>) -> Self {
        RefineFrame {
            birth_poses,
            bounds,
            margin: CROP_MARGIN,
        }
    }
}

/// Re-expresses a map in the world frame (translating agent maps by their
/// birth position) and crops it to the explored region united with the
/// team bounds, plus a margin.
pub fn refine_map(map: &OccGrid, frame: &RefineFrame) -> Result<OccGrid, MapError> {
    let mut world = map.clone();
    if let MapFrame::Agent(id) = map.frame {
        let birth = frame.birth_poses.get(id).ok_or(MapError::UnknownAgent(id))?;
        let snap = |v: f64| (v / map.resolution).round() * map.resolution;
        world.origin = Point::new(snap(map.origin.x + birth.x), snap(map.origin.y + birth.y));
        world.frame = MapFrame::World;
    }
    let explored = world.explored_bounds().ok_or(MapError::EmptyMap)?;
    let r = match frame.bounds {
        Some(b) => CellRect {
            x0: explored.x0.min(b.x0),
            y0: explored.y0.min(b.y0),
            x1: explored.x1.max(b.x1),
            y1: explored.y1.max(b.y1),
        },
        None => explored,
    };
    let m = frame.margin;
    Ok(world.crop_world(CellRect {
        x0: r.x0 - m,
        y0: r.y0 - m,
        x1: r.x1 + m,
        y1: r.y1 + m,
    }))
}

/// Per-cell maximum of both channels over aligned world-frame maps. The
/// result spans the union of the inputs' extents.
pub fn merge_maps(maps: &[&OccGrid]) -> Result<OccGrid, MapError> {
    let first = maps.first().ok_or(MapError::NoMaps)?;
    let res = first.resolution;
    let mut rect: Option<CellRect> = None;
    for m in maps {
        if m.frame != MapFrame::World {
            return Err(MapError::FrameMismatch(format!("{:?} map", m.frame)));
        }
        if m.resolution != res {
            return Err(MapError::FrameMismatch(format!(
                "resolution {} vs {}",
                m.resolution, res
            )));
        }
        for v in [m.origin.x / res, m.origin.y / res] {
            if (v - v.round()).abs() > 1e-6 {
                return Err(MapError::FrameMismatch(format!(
                    "origin ({}, {}) off the world lattice",
                    m.origin.x, m.origin.y
                )));
            }
        }
        let off = m.lattice_offset();
        let r = CellRect {
            x0: off.x,
            y0: off.y,
            x1: off.x + m.width() as i64 - 1,
            y1: off.y + m.height() as i64 - 1,
        };
        rect = Some(match rect {
            None => r,
            Some(a) => CellRect {
                x0: a.x0.min(r.x0),
                y0: a.y0.min(r.y0),
                x1: a.x1.max(r.x1),
                y1: a.y1.max(r.y1),
            },
        });
    }
    let rect = rect.expect("non-empty input");
    let mut out = OccGrid::world(rect, res);
    for m in maps {
        let off = m.lattice_offset();
        let (dx, dy) = (off.x - rect.x0, off.y - rect.y0);
        for (c, e) in m.explored.iter() {
            let d = c.offset(dx, dy);
            out.explored[d] = out.explored[d].max(*e);
            out.obstacle[d] = out.obstacle[d].max(m.obstacle[c]);
        }
    }
    Ok(out)
}
