use std::collections::{BTreeMap, BTreeSet};

use coexplore::metrics::EpisodeRecord;
use coexplore::planners::PlannerKind;
use coexplore::sim::TeamSchedule;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{LengthSpec, SuiteConfig};
use crate::run::{calibrate_episode_length, run_episode, EpisodeSpec};
use crate::BenchError;

/// FNV-1a over `scene \0 planner \0` followed by `base + index` in little
/// endian, so every (scene, planner) cell draws an independent seed stream.
pub fn episode_seed(base: u64, index: u64, scene: &str, planner: PlannerKind) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let bytes = scene
        .bytes()
        .chain([0])
        .chain(planner.name().bytes())
        .chain([0])
        .chain(base.wrapping_add(index).to_le_bytes());
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeOutcome {
    pub scene: String,
    pub planner: String,
    pub schedule: String,
    pub episode: usize,
    pub seed: u64,
    pub record: Option<EpisodeRecord>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub scene: String,
    pub planner: String,
    pub schedule: String,
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single episode.
    pub std: f64,
    pub n: usize,
    /// Episodes of this cell that failed and are missing from `n`.
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub rows: Vec<AggregateRow>,
    pub records: Vec<EpisodeOutcome>,
}

pub const METRICS: [&str; 3] = ["coverage", "steps", "mutual_overlap"];

fn metric(r: &EpisodeRecord, m: &str) -> Option<f64> {
    match m {
        "coverage" => Some(r.final_coverage),
        "steps" => Some(r.steps_to_90 as f64),
        "mutual_overlap" => r.mutual_overlap,
        _ => None,
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

struct Job {
    group: usize,
    planner: PlannerKind,
    schedule: TeamSchedule,
    episode: usize,
    seed: u64,
}

/// Runs every (scene × planner × schedule × episode) on `jobs` worker
/// threads. Failed episodes, including every episode of a scene that does
/// not load, are recorded and excluded from the aggregates.
pub fn run_suite(cfg: &SuiteConfig, jobs: usize) -> Result<SuiteReport, BenchError> {
    cfg.validate()?;
    let names: Vec<String> = cfg.groups.iter().map(|g| g.scene.name()).collect();
    let scenes: Vec<Result<_, String>> = cfg.groups.iter().map(|g| g.scene.load().map_err(|e| e.to_string())).collect();
    let mut cells = BTreeSet::new();
    let mut work = Vec::new();
    for (gi, g) in cfg.groups.iter().enumerate() {
        for &planner in &g.planners {
            for &schedule in &g.schedules {
                if !cells.insert((names[gi].clone(), planner, schedule.to_string())) {
                    return Err(BenchError::Config(format!("cell {} / {planner} / {schedule} appears twice", names[gi])));
                }
                for i in 0..g.episodes {
                    let seed = episode_seed(cfg.base_seed, i as u64, &names[gi], planner);
                    work.push(Job { group: gi, planner, schedule, episode: i, seed });
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| BenchError::Config(format!("worker pool: {e}")))?;
    let lengths: Vec<Result<u64, String>> = pool.install(|| {
        scenes
            .par_iter()
            .map(|s| {
                let s = s.as_ref().map_err(Clone::clone)?;
                match cfg.length {
                    LengthSpec::Fixed(n) => Ok(n),
                    LengthSpec::Calibrate => {
                        calibrate_episode_length(s, cfg.calibration_seeds, cfg.sim).map_err(|e| e.to_string())
                    }
                }
            })
            .collect()
    });
    let mut records: Vec<EpisodeOutcome> = pool.install(|| {
        work.par_iter()
            .map(|j| {
                let result = lengths[j.group].clone().and_then(|length| {
                    let scene = scenes[j.group].as_ref().map_err(Clone::clone)?;
                    let mut spec = EpisodeSpec::new(j.planner, j.schedule, j.seed, length);
                    spec.sim = cfg.sim;
                    run_episode(scene, &spec).map_err(|e| e.to_string())
                });
                let (record, error) = match result {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e)),
                };
                EpisodeOutcome {
                    scene: names[j.group].clone(),
                    planner: j.planner.to_string(),
                    schedule: j.schedule.to_string(),
                    episode: j.episode,
                    seed: j.seed,
                    record,
                    error,
                }
            })
            .collect()
    });
    records.sort_by(|a, b| {
        (&a.scene, &a.planner, &a.schedule, a.episode).cmp(&(&b.scene, &b.planner, &b.schedule, b.episode))
    });
    Ok(SuiteReport { rows: aggregate(&records), records })
}

/// Mean and std per (scene, planner, schedule, metric) in sorted key order.
pub fn aggregate(records: &[EpisodeOutcome]) -> Vec<AggregateRow> {
    let mut cells: BTreeMap<(&str, &str, &str), Vec<&EpisodeOutcome>> = BTreeMap::new();
    for r in records {
        cells.entry((&r.scene, &r.planner, &r.schedule)).or_default().push(r);
    }
    let mut rows = Vec::new();
    for ((scene, planner, schedule), eps) in cells {
        let ok: Vec<&EpisodeRecord> = eps.iter().filter_map(|e| e.record.as_ref()).collect();
        let failed = eps.len() - ok.len();
        for m in METRICS {
            let xs: Vec<f64> = ok.iter().filter_map(|r| metric(r, m)).collect();
            if xs.is_empty() && failed == 0 {
                continue;
            }
            let (mean, std) = if xs.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&xs) };
            rows.push(AggregateRow {
                scene: scene.into(),
                planner: planner.into(),
                schedule: schedule.into(),
                metric: m.into(),
                mean,
                std,
                n: xs.len(),
                failed,
            });
        }
    }
    rows
}
