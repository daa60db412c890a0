//! Occupancy worlds: the text scene format and a seeded room-and-corridor
//! generator.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Cell, Point};
use crate::grid::Grid;

pub const DEFAULT_RESOLUTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Free,
    Obstacle,
    /// Outside the building: neither explorable nor traversable.
    Exterior,
}

impl CellKind {
    fn from_glyph(c: char) -> Option<Self> {
        match c {
            '.' => Some(CellKind::Free),
            '#' => Some(CellKind::Obstacle),
            'X' => Some(CellKind::Exterior),
            _ => None,
        }
    }

    fn glyph(self) -> char {
        match self {
            CellKind::Free => '.',
            CellKind::Obstacle => '#',
            CellKind::Exterior => 'X',
        }
    }
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("reading scene file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("free space splits into {components} components")]
    DisconnectedScene { components: usize },
    #[error("spawn region contains no free cell")]
    EmptySpawn,
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("scene generation failed for seed {seed} after {attempts} attempts")]
    GenerationFailed { seed: u64, attempts: usize },
}

/// Inclusive cell rectangle `x0..=x1, y0..=y1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRect {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl CellRect {
    pub fn contains(&self, c: Cell) -> bool {
        c.x >= self.x0 && c.x <= self.x1 && c.y >= self.y0 && c.y <= self.y1
    }
}

/// Immutable indoor world.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    name: String,
    grid: Grid<CellKind>,
    resolution: f64,
    spawn: Vec<Cell>,
    spawn_rect: Option<CellRect>,
    free_cells: usize,
}

impl Scene {
    /// Validates and assembles a scene. `spawn_rect` of `None` means every
    /// free cell is a spawn cell.
    pub fn new(
        name: impl Into<String>,
        grid: Grid<CellKind>,
        resolution: f64,
        spawn_rect: Option<CellRect>,
    ) -> Result<Self, SceneError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(SceneError::Parse {
                line: 1,
                msg: format!("resolution must be positive, got {resolution}"),
            });
        }
        let components = free_components(&grid);
        if components != 1 {
            return Err(SceneError::DisconnectedScene { components });
        }
        let spawn: Vec<Cell> = grid
            .iter()
            .filter(|(c, k)| {
                **k == CellKind::Free && spawn_rect.is_none_or(|r| r.contains(*c))
            })
            .map(|(c, _)| c)
            .collect();
        if spawn.is_empty() {
            return Err(SceneError::EmptySpawn);
        }
        let free_cells = grid.as_slice().iter().filter(|k| **k == CellKind::Free).count();
        Ok(Scene {
            name: name.into(),
            grid,
            resolution,
            spawn,
            spawn_rect,
            free_cells,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn grid(&self) -> &Grid<CellKind> {
        &self.grid
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Spawn cells in row-major order.
    pub fn spawn_region(&self) -> &[Cell] {
        &self.spawn
    }

    /// Cells outside the grid read as exterior.
    pub fn kind(&self, c: Cell) -> CellKind {
        self.grid.get(c).copied().unwrap_or(CellKind::Exterior)
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.kind(c) == CellKind::Free
    }

    pub fn free_cell_count(&self) -> usize {
        self.free_cells
    }

    pub fn cell_of(&self, p: Point) -> Cell {
        crate::geometry::point_to_cell(p, Point::default(), self.resolution)
    }

    pub fn center_of(&self, c: Cell) -> Point {
        crate::geometry::cell_center(c, Point::default(), self.resolution)
    }

    /// Serializes to the text format read by [`parse_scene`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "resolution_m={}", self.resolution);
        if let Some(r) = self.spawn_rect {
            let _ = writeln!(out, "spawn={},{},{},{}", r.x0, r.y0, r.x1, r.y1);
        }
        for y in 0..self.height() {
            for x in 0..self.width() {
                out.push(self.grid[Cell::new(x as i64, y as i64)].glyph());
            }
            out.push('\n');
        }
        out
    }
}

/// Area of all free cells in m².
pub fn explorable_area(scene: &Scene) -> f64 {
    scene.free_cell_count() as f64 * scene.resolution() * scene.resolution()
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".to_owned());
    parse_scene(&text, &name)
}

pub fn parse_scene(text: &str, name: &str) -> Result<Scene, SceneError> {
    let mut lines = text.lines().enumerate().peekable();
    let (_, first) = lines.next().ok_or(SceneError::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let resolution = first
        .trim()
        .strip_prefix("resolution_m=")
        .ok_or_else(|| SceneError::Parse {
            line: 1,
            msg: "expected `resolution_m=<float>`".into(),
        })?
        .parse::<f64>()
        .map_err(|e| SceneError::Parse {
            line: 1,
            msg: format!("bad resolution: {e}"),
        })?;

    let mut spawn_rect = None;
    if let Some((i, line)) = lines.peek().copied() {
        if let Some(rest) = line.trim().strip_prefix("spawn=") {
            lines.next();
            let parts: Vec<i64> = rest
                .split(',')
                .map(|s| s.trim().parse::<i64>())
                .collect::<Result<_, _>>()
                .map_err(|e| SceneError::Parse {
                    line: i + 1,
                    msg: format!("bad spawn rectangle: {e}"),
                })?;
            if parts.len() != 4 {
                return Err(SceneError::Parse {
                    line: i + 1,
                    msg: "spawn needs four integers x0,y0,x1,y1".into(),
                });
            }
            spawn_rect = Some(CellRect {
                x0: parts[0],
                y0: parts[1],
                x1: parts[2],
                y1: parts[3],
            });
        }
    }

    let mut width = None;
    let mut cells = Vec::new();
    let mut height = 0;
    for (i, line) in lines {
        let row: Vec<CellKind> = line
            .chars()
            .map(|c| {
                CellKind::from_glyph(c).ok_or_else(|| SceneError::Parse {
                    line: i + 1,
                    msg: format!("unknown glyph {c:?}"),
                })
            })
            .collect::<Result<_, _>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(SceneError::Parse {
                    line: i + 1,
                    msg: format!("ragged row: expected {w} cells, found {}", row.len()),
                })
            }
            _ => {}
        }
        cells.extend(row);
        height += 1;
    }
    let width = width.filter(|w| *w > 0).ok_or(SceneError::Parse {
        line: 2,
        msg: "no grid rows".into(),
    })?;
    Scene::new(name, Grid::from_vec(width, height, cells), resolution, spawn_rect)
}

/// Number of 4-connected components of free cells.
pub fn free_components(grid: &Grid<CellKind>) -> usize {
    let mut seen = Grid::filled(grid.width(), grid.height(), false);
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in grid.cells() {
        if grid[start] != CellKind::Free || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            for n in c.neighbors4() {
                if grid.get(n) == Some(&CellKind::Free) && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub rooms: usize,
    pub width: usize,
    pub height: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            rooms: 4,
            width: 80,
            height: 80,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(2..=12).contains(&self.rooms) {
            return Err(SceneError::InvalidParams(format!(
                "room count {} outside 2..=12",
                self.rooms
            )));
        }
        for side in [self.width, self.height] {
            if !(40..=200).contains(&side) {
                return Err(SceneError::InvalidParams(format!(
                    "side {side} outside 40..=200 cells"
                )));
            }
        }
        Ok(())
    }
}

const GENERATION_ATTEMPTS: usize = 50;
const CORRIDOR_HALF_WIDTH: i64 = 3;

#[derive(Debug, Clone, Copy)]
struct Room {
    x0: i64,
    y0: i64,
    x1: i64,
    y1: i64,
}

impl Room {
    fn center(&self) -> Cell {
        Cell::new((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)
    }

    fn overlaps(&self, other: &Room, gap: i64) -> bool {
        self.x0 - gap <= other.x1
            && other.x0 - gap <= self.x1
            && self.y0 - gap <= other.y1
            && other.y0 - gap <= self.y1
    }
}

/// Seeded axis-aligned rooms joined by 7-cell corridors; every free cell is
/// a spawn cell. A pure function of `(seed, params)`.
pub fn generate_scene(seed: u64, params: GeneratorParams) -> Result<Scene, SceneError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..GENERATION_ATTEMPTS {
        if let Some(grid) = try_generate(&mut rng, &params) {
            if free_components(&grid) == 1 {
                let name = format!(
                    "gen-{seed}-{}r-{}x{}",
                    params.rooms, params.width, params.height
                );
                return Scene::new(name, grid, DEFAULT_RESOLUTION, None);
            }
        }
    }
    Err(SceneError::GenerationFailed {
        seed,
        attempts: GENERATION_ATTEMPTS,
    })
}

fn try_generate(rng: &mut ChaCha8Rng, p: &GeneratorParams) -> Option<Grid<CellKind>> {
    let (w, h) = (p.width as i64, p.height as i64);
    let min_side = 10;
    let max_side = ((w.min(h) * 2) / 5).clamp(12, 60);

    let mut rooms: Vec<Room> = Vec::with_capacity(p.rooms);
    for _ in 0..p.rooms {
        let mut placed = None;
        for _ in 0..300 {
            let rw = rng.random_range(min_side..=max_side);
            let rh = rng.random_range(min_side..=max_side);
            if rw > w - 4 || rh > h - 4 {
                continue;
            }
            let x0 = rng.random_range(2..=w - 2 - rw);
            let y0 = rng.random_range(2..=h - 2 - rh);
            let room = Room {
                x0,
                y0,
                x1: x0 + rw - 1,
                y1: y0 + rh - 1,
            };
            if rooms.iter().all(|r| !r.overlaps(&room, 3)) {
                placed = Some(room);
                break;
            }
        }
        rooms.push(placed?);
    }

    let mut grid = Grid::filled(p.width, p.height, CellKind::Exterior);
    for r in &rooms {
        for y in r.y0..=r.y1 {
            for x in r.x0..=r.x1 {
                grid[Cell::new(x, y)] = CellKind::Free;
            }
        }
        if r.x1 - r.x0 >= 11 && r.y1 - r.y0 >= 11 && rng.random_bool(0.5) {
            let px = rng.random_range(r.x0 + 3..=r.x1 - 4);
            let py = rng.random_range(r.y0 + 3..=r.y1 - 4);
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                grid[Cell::new(px + dx, py + dy)] = CellKind::Obstacle;
            }
        }
    }

    // spanning tree: each room links to its nearest predecessor
    for i in 1..rooms.len() {
        let c = rooms[i].center();
        let j = (0..i)
            .min_by_key(|&j| (rooms[j].center().dist2(c), j))
            .expect("at least one predecessor");
        carve_corridor(&mut grid, c, rooms[j].center(), rng.random_bool(0.5));
    }

    // wall ring around every free cell
    let walls: Vec<Cell> = grid
        .cells()
        .filter(|&c| grid[c] == CellKind::Exterior)
        .filter(|&c| c.neighbors8().iter().any(|&n| grid.get(n) == Some(&CellKind::Free)))
        .collect();
    for c in walls {
        grid[c] = CellKind::Obstacle;
    }

    Some(grid)
}

fn carve_corridor(grid: &mut Grid<CellKind>, a: Cell, b: Cell, horizontal_first: bool) {
    let corner = if horizontal_first {
        Cell::new(b.x, a.y)
    } else {
        Cell::new(a.x, b.y)
    };
    carve_straight(grid, a, corner);
    carve_straight(grid, corner, b);
}

fn carve_straight(grid: &mut Grid<CellKind>, a: Cell, b: Cell) {
    let (x0, x1) = (a.x.min(b.x), a.x.max(b.x));
    let (y0, y1) = (a.y.min(b.y), a.y.max(b.y));
    for y in y0 - CORRIDOR_HALF_WIDTH..=y1 + CORRIDOR_HALF_WIDTH {
        for x in x0 - CORRIDOR_HALF_WIDTH..=x1 + CORRIDOR_HALF_WIDTH {
            if let Some(k) = grid.get_mut(Cell::new(x, y)) {
                *k = CellKind::Free;
            }
        }
    }
}
