//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines always show in
//! `cargo test` output. A criterion listed in `KNOWN_DEFECTS` still runs and
//! still prints FAIL, but does not fail the process; every other FAIL does.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, BTreeMap};
use std::time::Instant;

use coexplore::episode::{Episode, EpisodeConfig};
use coexplore::frontier::{detect_frontiers, is_frontier};
use coexplore::grid::Grid;
use coexplore::mapping::merge_maps;
use coexplore::metrics::union_coverage;
use coexplore::nav::{fmm_field, TraversableMask};
use coexplore::planners::{
    is_goal_cell, make_planner, plan_with_fallback, AgentView, FrontierView, PlannerContext, PlannerKind,
    PlannerParams, RrtTree,
};
use coexplore::rl_env::{compute_reward, AreaSnapshot, EnvParams, ExploreEnv, GlobalGoal, RewardBreakdown, RewardState};
use coexplore::scene::{generate_scene, parse_scene, CellRect, GeneratorParams, Scene};
use coexplore::sim::TeamSchedule;
use coexplore::{Cell, OccGrid, Point, Pose};
use coexplore_bench::{parse_config, render_csv, render_json, run_episode, run_suite, EpisodeSpec};
use coexplore_teamformer::{flop_estimate, ise_forward, tre_forward, AttentionWeights, FeatureTensor, ModelConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Criteria whose reference expectation contradicts its own formula; see
/// the README. They are evaluated and reported, not waived.
const KNOWN_DEFECTS: [u32; 1] = [6];

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "frontier oracle equivalence", c1_frontiers),
        (2, "fmm bounds", c2_fmm),
        (3, "merge algebra", c3_merge),
        (4, "reward exactness", c4_reward),
        (5, "action-space round trip", c5_decode),
        (6, "teamformer properties", c6_teamformer),
        (7, "planner invariants", c7_planners),
        (8, "directional ordering", c8_ordering),
        (9, "determinism", c9_determinism),
        (10, "team-size schedules", c10_schedules),
    ];
    let mut unexpected = Vec::new();
    for (id, name, f) in criteria {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && KNOWN_DEFECTS.contains(&id) { " [known reference defect]" } else { "" };
        println!("{tag} criterion {id:>2} {name} ({secs:.1} s): {}{note}", o.detail);
        if !o.pass && !KNOWN_DEFECTS.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}

fn world(w: i64, h: i64) -> OccGrid {
    OccGrid::world(CellRect { x0: 0, y0: 0, x1: w - 1, y1: h - 1 }, 0.05)
}

// 1 ---------------------------------------------------------------------

fn c1_frontiers() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatched = 0;
    for _ in 0..200 {
        let mut m = world(50, 50);
        for c in m.explored.cells().collect::<Vec<_>>() {
            m.explored[c] = rng.random();
            m.obstacle[c] = if rng.random_bool(0.15) { rng.random() } else { 0.0 };
        }
        let got: Vec<Cell> = detect_frontiers(&m).into_iter().map(|f| f.cell).collect();
        let mut want = Vec::new();
        for y in 0..50i64 {
            for x in 0..50i64 {
                let c = Cell::new(x, y);
                if m.explored[c] < 0.5 || m.obstacle[c] >= 0.5 {
                    continue;
                }
                let open = [(0, -1), (-1, 0), (1, 0), (0, 1)].iter().any(|(dx, dy)| {
                    let n = Cell::new(x + dx, y + dy);
                    (0..50).contains(&n.x) && (0..50).contains(&n.y) && m.explored[n] < 0.5
                });
                if open {
                    want.push(c);
                }
            }
        }
        mismatched += (got != want) as usize;
    }
    let secs = t.elapsed().as_secs_f64();
    check(mismatched == 0 && secs < 5.0, format!("{mismatched}/200 maps differ, {secs:.2} s (limit 5 s)"))
}

// 2 ---------------------------------------------------------------------

fn dijkstra8(mask: &Grid<bool>, source: Cell, h: f64) -> Grid<f64> {
    let mut dist = Grid::filled(mask.width(), mask.height(), f64::INFINITY);
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Reverse((0u64, source.y, source.x)));
    while let Some(Reverse((bits, y, x))) = heap.pop() {
        let c = Cell::new(x, y);
        let d = f64::from_bits(bits);
        if d > dist[c] {
            continue;
        }
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                let n = Cell::new(x + dx, y + dy);
                if (dx, dy) == (0, 0) || !mask.get(n).copied().unwrap_or(false) {
                    continue;
                }
                let nd = d + h * ((dx * dx + dy * dy) as f64).sqrt();
                if nd < dist[n] {
                    dist[n] = nd;
                    heap.push(Reverse((nd.to_bits(), n.y, n.x)));
                }
            }
        }
    }
    dist
}

fn c2_fmm() -> Outcome {
    let t = Instant::now();
    let h = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    for _ in 0..100 {
        let mut g = Grid::from_vec(40, 40, (0..1600).map(|_| rng.random_bool(0.75)).collect());
        let s = Cell::new(rng.random_range(0..40), rng.random_range(0..40));
        g[s] = true;
        let f = fmm_field(&TraversableMask::from_bools(g.clone(), h), s).unwrap();
        let d = dijkstra8(&g, s, h);
        for c in g.cells() {
            let (fv, dv) = (f.value(c), d[c]);
            let e = h * (((c.x - s.x).pow(2) + (c.y - s.y).pow(2)) as f64).sqrt();
            let ok = if dv.is_finite() { fv.is_finite() && e <= fv + 1e-9 && fv <= dv + 1e-9 } else { !fv.is_finite() };
            violations += (!ok) as usize;
        }
    }
    let open = Grid::filled(100, 100, true);
    let s = Cell::new(50, 50);
    let f = fmm_field(&TraversableMask::from_bools(open, h), s).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let c = loop {
            let c = Cell::new(rng.random_range(0..100), rng.random_range(0..100));
            if c != s {
                break c;
            }
        };
        let e = h * (((c.x - s.x).pow(2) + (c.y - s.y).pow(2)) as f64).sqrt();
        worst = worst.max((f.value(c) - e).abs() / e);
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        violations == 0 && worst < 0.02 && secs < 10.0,
        format!("{violations} bound violations on 100 masks; open-grid max rel. error {:.3}% (limit 2%); {secs:.2} s", worst * 100.0),
    )
}

// 3 ---------------------------------------------------------------------

fn random_world_map(rng: &mut ChaCha8Rng) -> OccGrid {
    let x0 = rng.random_range(-10..10);
    let y0 = rng.random_range(-10..10);
    let mut m = OccGrid::world(
        CellRect { x0, y0, x1: x0 + rng.random_range(5..30), y1: y0 + rng.random_range(5..30) },
        0.05,
    );
    const LEVELS: [f64; 6] = [0.0, 0.1, 0.3, 0.5, 0.8, 1.0];
    for c in m.explored.cells().collect::<Vec<_>>() {
        m.explored[c] = LEVELS[rng.random_range(0..6)];
        m.obstacle[c] = LEVELS[rng.random_range(0..6)];
    }
    m
}

fn c3_merge() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bad = [0usize; 3];
    for _ in 0..100 {
        let (a, b, c) = (random_world_map(&mut rng), random_world_map(&mut rng), random_world_map(&mut rng));
        let m2 = |x: &OccGrid, y: &OccGrid| merge_maps(&[x, y]).unwrap();
        bad[0] += (m2(&m2(&a, &b), &c) != m2(&a, &m2(&b, &c))) as usize;
        bad[1] += (m2(&a, &b) != m2(&b, &a)) as usize;
        bad[2] += (m2(&a, &a) != merge_maps(&[&a]).unwrap()) as usize;
    }
    check(
        bad == [0, 0, 0],
        format!("failures over 100 triples: associativity {}, commutativity {}, idempotence {}", bad[0], bad[1], bad[2]),
    )
}

// 4 ---------------------------------------------------------------------

fn open_scene(w: usize, h: usize) -> Scene {
    let rows = vec![".".repeat(w); h].join("\n");
    parse_scene(&format!("resolution_m=0.05\n{rows}\n"), "open").unwrap()
}

/// Explored probability `v` on scene rows `lo..hi`, columns `0..cols`.
fn band(s: &Scene, lo: i64, hi: i64, cols: i64, v: f64) -> Grid<f64> {
    let mut g = Grid::filled(s.width(), s.height(), 0.0);
    for c in g.cells().collect::<Vec<_>>() {
        if (lo..hi).contains(&c.y) && c.x < cols {
            g[c] = v;
        }
    }
    g
}

fn snap(agents: Vec<(usize, Grid<f64>)>) -> AreaSnapshot {
    AreaSnapshot { agents: agents.into_iter().collect() }
}

/// Reward terms straight from their definitions, per-cell loops.
#[derive(Clone)]
struct Oracle {
    prev: BTreeMap<usize, Grid<f64>>,
    overlap: f64,
    low: bool,
    high: bool,
}

impl Oracle {
    fn new() -> Self {
        Oracle { prev: BTreeMap::new(), overlap: 0.0, low: false, high: false }
    }

    fn step(&mut self, s: &Scene, now: &BTreeMap<usize, Grid<f64>>, active: &[usize]) -> Vec<(usize, [f64; 6])> {
        let a = s.resolution() * s.resolution();
        let free: Vec<Cell> = s.grid().cells().filter(|c| s.is_free(*c)).collect();
        let p = |m: &BTreeMap<usize, Grid<f64>>, k: usize, c: Cell| m.get(&k).map_or(0.0, |g| g[c]);
        let team = |m: &BTreeMap<usize, Grid<f64>>, c: Cell| m.values().any(|g| g[c] >= 0.5);
        let before = free.iter().filter(|c| team(&self.prev, **c)).count() as f64;
        let after = free.iter().filter(|c| team(now, **c)).count() as f64;
        let ratio = after / free.len() as f64;
        let mut pairs = Vec::new();
        for &k in active {
            for &u in active {
                if k != u {
                    pairs.push(free.iter().filter(|c| p(now, k, **c) + p(&self.prev, u, **c) > 1.2).count() as f64 * a);
                }
            }
        }
        let overlap = if pairs.is_empty() { 0.0 } else { pairs.iter().sum::<f64>() / pairs.len() as f64 };
        let (c_over, c_time) = match ratio {
            r if r < 0.9 => (0.01, -0.002),
            r if r < 0.95 => (0.006, -0.001),
            _ => (0.0, -0.0002),
        };
        let mut success = 0.0;
        if !self.high && ratio >= 0.95 {
            success += 1.0 * ratio;
            self.high = true;
        }
        if !self.low && ratio >= 0.9 {
            success += 0.5 * ratio;
            self.low = true;
        }
        let team_cov = 0.02 * (after - before) * a;
        let pen = -(overlap - self.overlap) * c_over;
        let out = active
            .iter()
            .map(|&k| {
                let fresh = free.iter().filter(|c| p(now, k, **c) >= 0.5 && !team(&self.prev, **c)).count() as f64;
                let ind = 0.02 * fresh * a;
                (k, [team_cov, ind, success, pen, c_time, team_cov + ind + success + pen + c_time])
            })
            .collect();
        self.prev = now.clone();
        self.overlap = overlap;
        out
    }
}

fn terms(r: &RewardBreakdown) -> [f64; 6] {
    [r.team_coverage, r.individual_coverage, r.success, r.overlap_penalty, r.time_penalty, r.total]
}

fn c4_reward() -> Outcome {
    let s10 = open_scene(10, 10);
    let s60 = open_scene(60, 40);
    let s100 = open_scene(100, 100);
    // each scenario: scene, then a chain of (active agents, snapshot)
    type Chain = Vec<(Vec<usize>, Vec<(usize, Grid<f64>)>)>;
    let scenarios: Vec<(&str, &Scene, Chain)> = vec![
        ("first scan, one agent", &s10, vec![(vec![0], vec![(0, band(&s10, 0, 4, 10, 1.0))])]),
        ("3 m^2 at ratio 0.5", &s60, vec![(vec![0], vec![(0, band(&s60, 0, 20, 60, 1.0))])]),
        (
            "2 m^2 overlap at ratio 0.8",
            &s100,
            vec![
                (vec![0, 1], vec![(0, band(&s100, 0, 80, 100, 1.0)), (1, band(&s100, 0, 0, 100, 0.0))]),
                (vec![0, 1], vec![(0, band(&s100, 0, 80, 100, 1.0)), (1, band(&s100, 0, 16, 100, 1.0))]),
            ],
        ),
        (
            "first crossing of 0.95 after 0.9",
            &s10,
            vec![
                (vec![0], vec![(0, band(&s10, 0, 9, 10, 1.0))]),
                (vec![0], vec![(0, { let mut g = band(&s10, 0, 9, 10, 1.0); for x in 0..5 { g[Cell::new(x, 9)] = 1.0; } g })]),
            ],
        ),
        ("jump past both thresholds", &s10, vec![(vec![0], vec![(0, band(&s10, 0, 10, 10, 1.0))])]),
        (
            "success never repeats",
            &s10,
            vec![
                (vec![0], vec![(0, band(&s10, 0, 9, 10, 1.0))]),
                (vec![0], vec![(0, band(&s10, 0, 9, 10, 1.0))]),
                (vec![0], vec![(0, band(&s10, 0, 10, 10, 1.0))]),
                (vec![0], vec![(0, band(&s10, 0, 10, 10, 1.0))]),
            ],
        ),
        (
            "overlap threshold 1.2 is strict",
            &s10,
            vec![
                (vec![0, 1], vec![(0, band(&s10, 0, 10, 10, 0.6)), (1, band(&s10, 0, 10, 10, 0.6))]),
                (vec![0, 1], vec![(0, band(&s10, 0, 10, 10, 0.6)), (1, band(&s10, 0, 5, 10, 0.7))]),
            ],
        ),
        (
            "three agents, mixed boundaries",
            &s100,
            vec![
                (vec![0, 1, 2], vec![(0, band(&s100, 0, 30, 100, 1.0)), (1, band(&s100, 20, 50, 70, 1.0)), (2, band(&s100, 60, 70, 100, 0.9))]),
                (vec![0, 1, 2], vec![(0, band(&s100, 0, 40, 100, 1.0)), (1, band(&s100, 20, 70, 90, 1.0)), (2, band(&s100, 30, 80, 100, 0.9))]),
            ],
        ),
        (
            "overlap penalty in the 0.9-0.95 bracket",
            &s10,
            vec![
                (vec![0, 1], vec![(0, band(&s10, 0, 5, 10, 1.0)), (1, band(&s10, 5, 8, 10, 1.0))]),
                (vec![0, 1], vec![(0, band(&s10, 0, 9, 10, 1.0)), (1, band(&s10, 2, 9, 10, 1.0))]),
            ],
        ),
        (
            "no new area: time penalty only",
            &s60,
            vec![
                (vec![0, 1], vec![(0, band(&s60, 0, 10, 60, 1.0)), (1, band(&s60, 30, 40, 60, 1.0))]),
                (vec![0, 1], vec![(0, band(&s60, 0, 10, 60, 1.0)), (1, band(&s60, 30, 40, 60, 1.0))]),
            ],
        ),
    ];
    let mut worst: f64 = 0.0;
    let mut worked_checks = Vec::new();
    for (name, scene, chain) in &scenarios {
        let mut state = RewardState::default();
        let mut oracle = Oracle::new();
        for (step, (active, grids)) in chain.iter().enumerate() {
            let now = snap(grids.clone());
            let want = oracle.step(scene, &now.agents, active);
            let (got, next) = compute_reward(&state, now, active, scene).unwrap();
            for ((k, g), (k2, w)) in got.iter().zip(&want) {
                assert_eq!(k, k2);
                for (a, b) in terms(g).iter().zip(w) {
                    worst = worst.max((a - b).abs());
                }
            }
            let r = got[0].1;
            match (*name, step) {
                ("3 m^2 at ratio 0.5", 0) => worked_checks.push((r.team_coverage - 0.06).abs() < 1e-12),
                ("2 m^2 overlap at ratio 0.8", 1) => worked_checks.push((r.overlap_penalty + 0.02).abs() < 1e-12),
                ("first crossing of 0.95 after 0.9", 1) => worked_checks.push((r.success - 0.95).abs() < 1e-12),
                _ => {}
            }
            state = next;
        }
    }
    // telescoping over a full episode
    let scene = generate_scene(4, GeneratorParams { rooms: 3, width: 60, height: 60 }).unwrap();
    let cfg = EpisodeConfig::new(PlannerKind::Random, TeamSchedule::fixed(2), 150, 4);
    let mut env = ExploreEnv::new(scene, cfg, EnvParams { feature_size: 64, ..Default::default() }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut sum = 0.0;
    while !env.is_done() {
        let goals: Vec<_> = env
            .episode()
            .sim()
            .active_ids()
            .into_iter()
            .map(|id| (id, GlobalGoal::new((rng.random_range(0..8), rng.random_range(0..8)), (rng.random(), rng.random())).unwrap()))
            .collect();
        sum += env.macro_step(&goals).unwrap().rewards[0].1.team_coverage / 0.02;
    }
    let tele = (sum - env.episode().team_area()).abs();
    let worked_ok = worked_checks.len() == 3 && worked_checks.iter().all(|b| *b);
    check(
        worst <= 1e-12 && worked_ok && tele <= 1e-9,
        format!("10 scenarios, max term error {worst:.1e} (limit 1e-12); stated examples {worked_checks:?}; telescoping error {tele:.1e} m^2 (limit 1e-9)"),
    )
}

// 5 ---------------------------------------------------------------------

fn c5_decode() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bad = 0;
    for _ in 0..10_000 {
        let (gx, gy): (u8, u8) = (rng.random_range(0..8), rng.random_range(0..8));
        let (px, py): (f64, f64) = (rng.random(), rng.random());
        let g = GlobalGoal::new((gx, gy), (px, py)).unwrap();
        let (x, y) = g.normalized();
        let fwd = x == (gx as f64 + px) / 8.0 && y == (gy as f64 + py) / 8.0;
        let back = GlobalGoal::from_normalized(x, y);
        let inv = back.region.0 as f64 == (8.0 * x).floor().min(7.0)
            && back.region.1 as f64 == (8.0 * y).floor().min(7.0)
            && back.point.0 == 8.0 * x - back.region.0 as f64
            && back.point.1 == 8.0 * y - back.region.1 as f64
            && back.normalized() == (x, y);
        bad += (!(fwd && inv)) as usize;
    }
    let ex = GlobalGoal::new((3, 5), (0.5, 0.5)).unwrap().normalized();
    let corners = (
        GlobalGoal::new((0, 0), (0.0, 0.0)).unwrap().normalized(),
        GlobalGoal::new((7, 7), (1.0, 1.0)).unwrap().normalized(),
    );
    let ok = bad == 0 && ex == (0.4375, 0.6875) && corners == ((0.0, 0.0), (1.0, 1.0));
    check(ok, format!("{bad}/10000 samples inexact; (3,5)+(0.5,0.5) -> {ex:?}; corners {corners:?}"))
}

// 6 ---------------------------------------------------------------------

fn c6_teamformer() -> Outcome {
    let w = AttentionWeights::seeded(ModelConfig::default(), 6);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut input = |n: usize| {
        let data = (0..n * 64 * 32).map(|_| rng.random_range(-1.0..1.0)).collect();
        FeatureTensor::from_vec(n, 8, 32, data).unwrap()
    };
    let mut perm_rng = ChaCha8Rng::seed_from_u64(60);
    let mut equiv: f64 = 0.0;
    for n in 2..=6 {
        let x = input(n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut perm_rng);
        let a = w.encode(&x).unwrap().permute_agents(&perm);
        let b = w.encode(&x.permute_agents(&perm)).unwrap();
        equiv = equiv.max(a.max_abs_diff(&b));
    }
    let x = input(3);
    let mut y = x.clone();
    y.token_mut(2, 3, 3)[0] += 1.0;
    let (ia, ib) = (ise_forward(&x, &w.blocks[0].ise).unwrap(), ise_forward(&y, &w.blocks[0].ise).unwrap());
    let ise_local = (0..64).all(|i| (0..2).all(|a| ia.token(a, i % 8, i / 8) == ib.token(a, i % 8, i / 8)));
    let mut z = x.clone();
    for a in 0..3 {
        z.token_mut(a, 0, 0)[1] -= 1.0;
    }
    let (ta, tb) = (tre_forward(&x, &w.blocks[0].tre).unwrap(), tre_forward(&z, &w.blocks[0].tre).unwrap());
    let tre_local = (1..64).all(|i| (0..3).all(|a| ta.token(a, i % 8, i / 8) == tb.token(a, i % 8, i / 8)));
    let sizes = (1..=8).all(|n| w.forward(&input(n), n - 1).is_ok());
    let f = flop_estimate(4, 8, 32);
    let hier_ok = f.hierarchical == 17_408;
    let unified_ok = f.unified == 262_144;
    check(
        equiv <= 1e-5 && ise_local && tre_local && sizes && hier_ok && unified_ok,
        format!(
            "equivariance max diff {equiv:.1e} (limit 1e-5); ISE locality {ise_local}; TRE locality {tre_local}; N=1..8 {sizes}; \
             hierarchical pairs {} (expected 17408); unified pairs {} = N^2 G^4 at N=4, G=8 (reference value 262144, which is 4^2 * 8^4 * 4 = N^3 G^4)",
            f.hierarchical, f.unified
        ),
    )
}

// 7 ---------------------------------------------------------------------

fn planner_map(rng: &mut ChaCha8Rng) -> OccGrid {
    let mut m = world(120, 120);
    for _ in 0..6 {
        let (cx, cy, r) = (rng.random_range(10..110), rng.random_range(10..110), rng.random_range(8..40));
        for c in m.explored.cells().collect::<Vec<_>>() {
            if (c.x - cx).pow(2) + (c.y - cy).pow(2) <= r * r {
                m.explored[c] = 1.0;
            }
        }
    }
    for _ in 0..200 {
        let c = Cell::new(rng.random_range(0..120), rng.random_range(0..120));
        m.explored[c] = 1.0;
        m.obstacle[c] = 1.0;
    }
    m
}

fn free_cell(m: &OccGrid, rng: &mut ChaCha8Rng) -> Cell {
    let free: Vec<Cell> = m.explored.cells().filter(|c| m.is_known_free(*c)).collect();
    free[rng.random_range(0..free.len())]
}

fn plan(kind: PlannerKind, m: &OccGrid, cells: &[Cell], seed: u64) -> Vec<Cell> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agents = cells
        .iter()
        .enumerate()
        .map(|(id, c)| {
            let p = m.center_of(*c);
            AgentView { id, pose: Pose::new(p.x, p.y, 0.0), trajectory: &[], previous_goal: None }
        })
        .collect();
    let mut ctx = PlannerContext { merged: m, agents, rng: &mut rng, timestep: 0 };
    plan_with_fallback(make_planner(kind, &PlannerParams::default()).as_mut(), &mut ctx)
}

fn c7_planners() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut invalid, mut not_frontier, mut foreign) = (0, 0, 0);
    for i in 0..20 {
        let m = planner_map(&mut rng);
        let agents: Vec<Cell> = (0..3).map(|_| free_cell(&m, &mut rng)).collect();
        let view = FrontierView::new(&m, &agents.iter().map(|c| m.center_of(*c)).collect::<Vec<_>>());
        let has_frontiers = !detect_frontiers(&view.map).is_empty();
        for kind in PlannerKind::ALL {
            let goals = plan(kind, &m, &agents, i);
            invalid += goals.iter().filter(|g| !is_goal_cell(&m, **g)).count();
            if has_frontiers && matches!(kind, PlannerKind::Nearest | PlannerKind::Utility | PlannerKind::Voronoi) {
                not_frontier += goals.iter().filter(|g| !is_frontier(&view.map, **g)).count();
            }
            if kind == PlannerKind::Voronoi {
                for (k, g) in goals.iter().enumerate() {
                    let owner = |c: Cell| {
                        let d: Vec<i64> = agents.iter().map(|a| (a.x - c.x).pow(2) + (a.y - c.y).pow(2)).collect();
                        d.iter().position(|x| x == d.iter().min().unwrap()).unwrap()
                    };
                    let owns_any = view.frontiers.iter().any(|f| owner(f.cell) == k);
                    foreign += (owns_any && owner(*g) != k) as usize;
                }
            }
        }
    }
    // locked edges: several agents walk one tree in the same tick
    let mut shared_edges = 0;
    for _ in 0..200 {
        let mut tree = RrtTree::with_root(Point::new(0.0, 0.0), 0);
        for _ in 0..rng.random_range(5..60) {
            let parent = rng.random_range(0..tree.nodes.len());
            tree.push(Point::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)), Some(parent), 0);
        }
        let mut at: Vec<usize> = (0..4).map(|_| rng.random_range(0..tree.nodes.len())).collect();
        for tick in 0..10u64 {
            let t = tick * 5;
            let mut taken: Vec<usize> = Vec::new();
            for a in at.iter_mut() {
                let before = tree.locked_until.clone();
                *a = tree.find_next_point(*a, t, 15);
                for (b, (old, new)) in before.iter().zip(&tree.locked_until).enumerate() {
                    if old != new {
                        shared_edges += (taken.contains(&b) || *old > t) as usize;
                        taken.push(b);
                    }
                }
            }
        }
    }
    let mut differ = 0;
    for i in 0..100 {
        let m = planner_map(&mut rng);
        let a = free_cell(&m, &mut rng);
        differ += (plan(PlannerKind::Voronoi, &m, &[a], i) != plan(PlannerKind::Utility, &m, &[a], i)) as usize;
    }
    check(
        invalid + not_frontier + foreign + shared_edges + differ == 0,
        format!(
            "invalid goals {invalid}, non-frontier goals {not_frontier}, Voronoi goals outside own partition {foreign}, \
             locked edges taken twice {shared_edges}, Voronoi(N=1) != Utility on {differ}/100 maps"
        ),
    )
}

// 8 ---------------------------------------------------------------------

fn c8_ordering() -> Outcome {
    let t = Instant::now();
    let planners = [PlannerKind::Random, PlannerKind::Utility, PlannerKind::Rrt];
    let jobs: Vec<(u64, PlannerKind)> = (0..20u64).flat_map(|s| planners.map(|p| (s, p))).collect();
    let steps: Vec<(PlannerKind, u64)> = jobs
        .par_iter()
        .map(|&(seed, p)| {
            let scene = generate_scene(seed, GeneratorParams { rooms: 4, width: 100, height: 100 }).unwrap();
            let r = run_episode(&scene, &EpisodeSpec::new(p, TeamSchedule::fixed(2), seed, 300)).unwrap();
            (p, r.steps_to_90)
        })
        .collect();
    let mean = |k: PlannerKind| {
        let v: Vec<f64> = steps.iter().filter(|(p, _)| *p == k).map(|(_, s)| *s as f64).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (r, u, q) = (mean(PlannerKind::Random), mean(PlannerKind::Utility), mean(PlannerKind::Rrt));
    let secs = t.elapsed().as_secs_f64();
    check(
        r > u && q < 0.9 * r && secs < 240.0,
        format!("mean Steps over 20 scenes: random {r:.1}, utility {u:.1}, rrt {q:.1} (need random > utility and rrt < {:.1}); {secs:.0} s (limit 240 s)", 0.9 * r),
    )
}

// 9 ---------------------------------------------------------------------

fn c9_determinism() -> Outcome {
    let cfg = parse_config(
        "base_seed = 9\nepisodes = 3\nlength = 90\n[a]\nscene = gen:1:60x60:2\nplanners = random, utility, rrt\nschedules = 2, 2:3@45\n[b]\nscene = gen:2:60x60:3\nplanners = apf, voronoi, wma-rrt\n",
        None,
    )
    .unwrap();
    let bytes = |r: &coexplore_bench::SuiteReport| (render_csv(&r.rows), render_json(r).unwrap());
    let first = run_suite(&cfg, 1).unwrap();
    let second = run_suite(&cfg, 1).unwrap();
    let parallel = run_suite(&cfg, 4).unwrap();
    let same = bytes(&first) == bytes(&second);
    let par = first.rows == parallel.rows && bytes(&first) == bytes(&parallel);
    let failed = first.records.iter().filter(|r| r.error.is_some()).count();
    check(
        same && par && failed == 0,
        format!("{} records; rerun byte-identical {same}; 4-worker == serial {par}; failed episodes {failed}", first.records.len()),
    )
}

// 10 --------------------------------------------------------------------

fn c10_schedules() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (a, b) in [(2, 3), (3, 2)] {
        let scene = generate_scene(10, GeneratorParams { rooms: 4, width: 100, height: 100 }).unwrap();
        let cfg = EpisodeConfig::new(PlannerKind::Utility, TeamSchedule::switching(a, b), 240, 10);
        let mut ep = match Episode::new(scene.clone(), cfg) {
            Ok(e) => e,
            Err(e) => return check(false, format!("{a}->{b}: {e}")),
        };
        let mut frozen = None;
        while !ep.is_done() {
            if let Err(e) = ep.tick() {
                return check(false, format!("{a}->{b} failed at t={}: {e}", ep.t()));
            }
            if ep.t() == 90 && b < a {
                frozen = Some(ep.truth_grid(2).clone());
            }
        }
        let active_after = ep.sim().active_ids().len();
        let monotone = ep.coverage_trace().windows(2).all(|w| w[1] >= w[0]);
        let grids: Vec<&Grid<f64>> = (0..a.max(b)).map(|i| ep.truth_grid(i)).collect();
        let union = union_coverage(&grids, &scene) == ep.coverage_ratio();
        let kept = frozen.is_none_or(|g| &g == ep.truth_grid(2));
        let rec = ep.into_record();
        let metrics = rec.mutual_overlap.is_some() && rec.final_coverage == *rec.coverage.last().unwrap();
        ok &= monotone && union && kept && metrics && active_after == b;
        notes.push(format!(
            "{a}->{b}: {active_after} active at end, monotone {monotone}, union-of-all-agents coverage {union}, departed map retained {kept}, coverage {:.3}",
            rec.final_coverage
        ));
    }
    check(ok, notes.join("; "))
}
