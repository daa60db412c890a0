use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coexplore::planners::PlannerKind;
use coexplore::sim::{NoiseParams, SimParams, TeamSchedule};
use coexplore_bench::report::ReportFormat;
use coexplore_bench::*;

#[derive(Parser)]
#[command(name = "coexplore", about = "Multi-agent exploration benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// One episode; writes its record as JSON.
    Run {
        /// Scene file or gen:SEED:WxH:ROOMS.
        #[arg(long)]
        scene: SceneSpec,
        #[arg(long, default_value = "rrt")]
        planner: PlannerKind,
        /// N, or N:M@STEP for a team-size switch.
        #[arg(long, default_value = "2")]
        agents: TeamSchedule,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Step count or "calibrate".
        #[arg(long, default_value = "300")]
        length: LengthSpec,
        #[arg(long)]
        out: PathBuf,
        /// Per-tick goal/coverage lines (JSON lines).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        no_noise: bool,
    },
    /// A configured suite; writes report.csv and report.json into DIR.
    Suite {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Median single-agent RRT steps to 95% coverage, in whole replan periods.
    Calibrate {
        #[arg(long)]
        scene: SceneSpec,
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        #[arg(long)]
        no_noise: bool,
    },
}

fn sim(no_noise: bool) -> SimParams {
    let mut s = SimParams::default();
    if no_noise {
        s.noise = NoiseParams::off();
    }
    s
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.cmd {
        Cmd::Run { scene, planner, agents, seed, length, out, trace, no_noise } => {
            let scene = scene.load()?;
            let length = match length {
                LengthSpec::Fixed(n) => n,
                LengthSpec::Calibrate => calibrate_episode_length(&scene, 3, sim(no_noise))?,
            };
            let mut spec = EpisodeSpec::new(planner, agents, seed, length);
            spec.sim = sim(no_noise);
            let (record, lines) = run_episode_traced(&scene, &spec)?;
            std::fs::write(&out, serde_json::to_string_pretty(&record)? + "\n")?;
            if let Some(path) = trace {
                let text: String = lines.iter().map(|l| l.to_json_line() + "\n").collect();
                std::fs::write(path, text)?;
            }
            println!(
                "{} {} {}: steps {} coverage {:.4} overlap {}",
                record.scene,
                record.planner,
                record.schedule,
                record.steps_to_90,
                record.final_coverage,
                record.mutual_overlap.map_or("-".into(), |v| format!("{v:.4}"))
            );
        }
        Cmd::Suite { config, out, jobs } => {
            let cfg = SuiteConfig::load(&config)?;
            let report = run_suite(&cfg, jobs)?;
            std::fs::create_dir_all(&out)?;
            emit_report(&report, ReportFormat::Csv, out.join("report.csv"))?;
            emit_report(&report, ReportFormat::Json, out.join("report.json"))?;
            print!("{}", render_csv(&report.rows));
        }
        Cmd::Calibrate { scene, seeds, no_noise } => {
            let scene = scene.load()?;
            println!("{}", calibrate_episode_length(&scene, seeds, sim(no_noise))?);
        }
    }
    Ok(())
}
