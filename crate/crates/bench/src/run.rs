use coexplore::episode::{Episode, EpisodeConfig};
use coexplore::metrics::EpisodeRecord;
use coexplore::planners::{PlannerKind, REPLAN_PERIOD};
use coexplore::rl_env::{DecodedGoal, TraceLine};
use coexplore::scene::Scene;
use coexplore::sim::{SimParams, TeamSchedule};
use coexplore::Cell;
use rayon::prelude::*;

use crate::BenchError;

/// Coverage the calibration run must reach.
pub const CALIBRATION_COVERAGE: f64 = 0.95;
/// Steps after which a calibration run gives up.
pub const CALIBRATION_CAP: u64 = 3000;

/// Everything that identifies one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSpec {
    pub planner: PlannerKind,
    pub schedule: TeamSchedule,
    pub seed: u64,
    pub length: u64,
    pub sim: SimParams,
}

impl EpisodeSpec {
    pub fn new(planner: PlannerKind, schedule: TeamSchedule, seed: u64, length: u64) -> Self {
        EpisodeSpec { planner, schedule, seed, length, sim: SimParams::default() }
    }

    fn config(&self) -> EpisodeConfig {
        let mut cfg = EpisodeConfig::new(self.planner, self.schedule, self.length, self.seed);
        cfg.sim = self.sim;
        cfg
    }

    fn context(&self, scene: &Scene) -> String {
        format!("{} / {} / {} / seed {}", scene.name(), self.planner, self.schedule, self.seed)
    }
}

pub fn run_episode(scene: &Scene, spec: &EpisodeSpec) -> Result<EpisodeRecord, BenchError> {
    run_episode_traced(scene, spec).map(|(r, _)| r)
}

/// Also returns one trace line per replan tick: the goals chosen at that
/// tick and the coverage at its end. Rewards stay empty; planners are not
/// scored.
pub fn run_episode_traced(scene: &Scene, spec: &EpisodeSpec) -> Result<(EpisodeRecord, Vec<TraceLine>), BenchError> {
    if spec.length == 0 {
        return Err(BenchError::Config("episode length must be positive".into()));
    }
    let ctx = |e| BenchError::Episode { context: spec.context(scene), source: e };
    let mut ep = Episode::new(scene.clone(), spec.config()).map_err(ctx)?;
    let mut trace: Vec<TraceLine> = Vec::new();
    while !ep.is_done() {
        let tick = ep.t() % REPLAN_PERIOD == 0;
        ep.tick().map_err(ctx)?;
        if tick {
            trace.push(TraceLine { t: ep.t(), goals: current_goals(&ep), rewards: Vec::new(), coverage: 0.0 });
        }
        if let Some(last) = trace.last_mut() {
            last.t = ep.t();
            last.coverage = ep.coverage_ratio();
        }
    }
    Ok((ep.into_record(), trace))
}

fn current_goals(ep: &Episode) -> Vec<(usize, DecodedGoal)> {
    let m = ep.merged();
    let off = m.lattice_offset();
    ep.sim()
        .active_ids()
        .into_iter()
        .filter_map(|id| {
            let world = ep.goal(id)?;
            let c = m.cell_of(world);
            let normalized = ((c.x as f64 + 0.5) / m.width() as f64, (c.y as f64 + 0.5) / m.height() as f64);
            Some((id, DecodedGoal { normalized, cell: Cell::new(c.x + off.x, c.y + off.y), world }))
        })
        .collect()
}

/// Steps a single RRT agent needs to reach 95% coverage, `None` at the cap.
pub fn steps_to_calibration_coverage(scene: &Scene, seed: u64, sim: SimParams) -> Result<Option<u64>, BenchError> {
    let mut spec = EpisodeSpec::new(PlannerKind::Rrt, TeamSchedule::fixed(1), seed, CALIBRATION_CAP);
    spec.sim = sim;
    let ctx = |e| BenchError::Episode { context: spec.context(scene), source: e };
    let mut ep = Episode::new(scene.clone(), spec.config()).map_err(ctx)?;
    while !ep.is_done() {
        ep.tick().map_err(ctx)?;
        if ep.coverage_ratio() >= CALIBRATION_COVERAGE {
            return Ok(Some(ep.t()));
        }
    }
    Ok(None)
}

/// Median over seeds `0..seeds` of single-agent RRT steps to 95% coverage,
/// rounded up to a whole number of replan periods.
pub fn calibrate_episode_length(scene: &Scene, seeds: u64, sim: SimParams) -> Result<u64, BenchError> {
    if seeds == 0 {
        return Err(BenchError::Config("calibration needs at least one seed".into()));
    }
    let reached = (0..seeds)
        .into_par_iter()
        .map(|s| steps_to_calibration_coverage(scene, s, sim))
        .collect::<Result<Vec<_>, _>>()?;
    let Some(mut steps) = reached.iter().copied().collect::<Option<Vec<u64>>>() else {
        return Err(BenchError::CalibrationTimeout { cap: CALIBRATION_CAP, reached });
    };
    steps.sort_unstable();
    let n = steps.len();
    let median = if n % 2 == 1 { steps[n / 2] } else { (steps[n / 2 - 1] + steps[n / 2]).div_ceil(2) };
    Ok(median.div_ceil(REPLAN_PERIOD) * REPLAN_PERIOD)
}
