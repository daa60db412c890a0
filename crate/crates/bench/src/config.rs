//! Suite configuration: flat `key = value` lines; global keys first, then
//! one `[section]` per cell group.
//!
//! ```text
//! base_seed = 7
//! episodes = 5
//! length = 300            # or: calibrate
//! noise = on              # on | off
//!
//! [offices]
//! scene = gen:3:100x100:4 # gen:SEED:WxH:ROOMS, or a scene file path
//! planners = random, utility, rrt
//! schedules = 2, 3:2@90
//! episodes = 10           # per-section override
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use coexplore::planners::PlannerKind;
use coexplore::scene::{generate_scene, load_scene, GeneratorParams, Scene};
use coexplore::sim::{SimParams, TeamSchedule};
use serde::{Deserialize, Serialize};

use crate::BenchError;

pub const DEFAULT_LENGTH: u64 = 300;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SceneSpec {
    File(PathBuf),
    Generated { seed: u64, width: usize, height: usize, rooms: usize },
}

impl SceneSpec {
    pub fn name(&self) -> String {
        match self {
            SceneSpec::File(p) => p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into()),
            SceneSpec::Generated { seed, width, height, rooms } => format!("gen-{seed}-{width}x{height}-r{rooms}"),
        }
    }

    pub fn load(&self) -> Result<Scene, BenchError> {
        let scene = match self {
            SceneSpec::File(p) => load_scene(p)?,
            SceneSpec::Generated { seed, width, height, rooms } => {
                generate_scene(*seed, GeneratorParams { rooms: *rooms, width: *width, height: *height })?
            }
        };
        Ok(scene.renamed(self.name()))
    }

    fn parse_in(s: &str, base: Option<&Path>) -> Result<Self, String> {
        let Some(rest) = s.strip_prefix("gen:") else {
            let p = PathBuf::from(s);
            return Ok(SceneSpec::File(match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }));
        };
        let bad = || format!("scene {s:?}: expected gen:SEED:WxH:ROOMS");
        let parts: Vec<&str> = rest.split(':').collect();
        let [seed, dims, rooms] = parts[..] else { return Err(bad()) };
        let (w, h) = dims.split_once('x').ok_or_else(bad)?;
        Ok(SceneSpec::Generated {
            seed: seed.parse().map_err(|_| bad())?,
            width: w.parse().map_err(|_| bad())?,
            height: h.parse().map_err(|_| bad())?,
            rooms: rooms.parse().map_err(|_| bad())?,
        })
    }
}

impl FromStr for SceneSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::parse_in(s, None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LengthSpec {
    Fixed(u64),
    Calibrate,
}

impl FromStr for LengthSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "calibrate" {
            return Ok(LengthSpec::Calibrate);
        }
        match s.parse::<u64>() {
            Ok(0) => Err("episode length must be positive".into()),
            Ok(n) => Ok(LengthSpec::Fixed(n)),
            Err(_) => Err(format!("length {s:?}: expected a step count or \"calibrate\"")),
        }
    }
}

/// One scene crossed with planners and schedules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGroup {
    pub name: String,
    pub scene: SceneSpec,
    pub planners: Vec<PlannerKind>,
    pub schedules: Vec<TeamSchedule>,
    pub episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub base_seed: u64,
    pub length: LengthSpec,
    /// Seeds used when `length` is `calibrate`.
    pub calibration_seeds: u64,
    pub sim: SimParams,
    pub groups: Vec<CellGroup>,
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.groups.is_empty() {
            return bad("no cell sections".into());
        }
        if self.length == LengthSpec::Fixed(0) {
            return bad("episode length must be positive".into());
        }
        for g in &self.groups {
            if g.episodes == 0 {
                return bad(format!("[{}]: episodes must be at least 1", g.name));
            }
            if g.planners.is_empty() || g.schedules.is_empty() {
                return bad(format!("[{}]: needs at least one planner and one schedule", g.name));
            }
            for s in &g.schedules {
                s.validate().map_err(|e| BenchError::Config(format!("[{}]: {e}", g.name)))?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        parse_config(&text, path.parent())
    }
}

fn list<T: FromStr>(v: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| s.parse().map_err(|e| format!("{e}"))).collect()
}

fn num<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("not a number: {v:?}"))
}

#[derive(Default)]
struct Section {
    name: String,
    scene: Option<SceneSpec>,
    planners: Option<Vec<PlannerKind>>,
    schedules: Option<Vec<TeamSchedule>>,
    episodes: Option<usize>,
}

/// Relative scene paths resolve against `base`.
pub fn parse_config(text: &str, base: Option<&Path>) -> Result<SuiteConfig, BenchError> {
    let mut cfg = SuiteConfig {
        base_seed: 0,
        length: LengthSpec::Fixed(DEFAULT_LENGTH),
        calibration_seeds: 3,
        sim: SimParams::default(),
        groups: Vec::new(),
    };
    let mut episodes = 1usize;
    let mut sections: Vec<Section> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let at = |m: String| BenchError::Config(format!("line {}: {m}", i + 1));
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            sections.push(Section { name: name.trim().to_string(), ..Default::default() });
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| at(format!("expected key = value, got {line:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        if !seen.insert((sections.len(), k.to_string())) {
            return Err(at(format!("duplicate key {k:?}")));
        }
        let r: Result<(), String> = match (sections.last_mut(), k) {
            (None, "base_seed") => num(v).map(|x| cfg.base_seed = x),
            (None, "episodes") => num(v).map(|x| episodes = x),
            (None, "length") => v.parse().map(|x| cfg.length = x),
            (None, "calibration_seeds") => num(v).map(|x| cfg.calibration_seeds = x),
            (None, "noise") => match v {
                "on" => Ok(()),
                "off" => {
                    cfg.sim.noise = coexplore::sim::NoiseParams::off();
                    Ok(())
                }
                _ => Err(format!("noise must be on or off, got {v:?}")),
            },
            (None, "sensor_range_m") => num(v).map(|x| cfg.sim.sensor.max_range = x),
            (None, "sensor_rays") => num(v).map(|x| cfg.sim.sensor.rays = x),
            (Some(s), "scene") => SceneSpec::parse_in(v, base).map(|x| s.scene = Some(x)),
            (Some(s), "planners") => list(v).map(|x| s.planners = Some(x)),
            (Some(s), "schedules") => list(v).map(|x| s.schedules = Some(x)),
            (Some(s), "episodes") => num(v).map(|x| s.episodes = Some(x)),
            _ => Err(format!("unknown key {k:?}")),
        };
        r.map_err(at)?;
    }
    for s in sections {
        let scene = s.scene.ok_or_else(|| BenchError::Config(format!("[{}]: missing scene", s.name)))?;
        cfg.groups.push(CellGroup {
            name: s.name,
            scene,
            planners: s.planners.unwrap_or_else(|| PlannerKind::ALL.to_vec()),
            schedules: s.schedules.unwrap_or_else(|| vec![TeamSchedule::fixed(2)]),
            episodes: s.episodes.unwrap_or(episodes),
        });
    }
    cfg.validate()?;
    Ok(cfg)
}
