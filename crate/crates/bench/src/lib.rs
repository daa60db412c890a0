//! Benchmark harness: suite configuration, seeded episode runs, episode
//! length calibration, aggregation and CSV/JSON reports.

pub mod config;
pub mod report;
pub mod run;
pub mod suite;

pub use config::{parse_config, CellGroup, LengthSpec, SceneSpec, SuiteConfig};
pub use report::{emit_report, render_csv, render_json, ReportFormat, CSV_HEADER};
pub use run::{calibrate_episode_length, run_episode, run_episode_traced, EpisodeSpec};
pub use suite::{aggregate, episode_seed, run_suite, AggregateRow, EpisodeOutcome, SuiteReport};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Scene(#[from] coexplore::scene::SceneError),
    #[error("{context}: {source}")]
    Episode { context: String, source: coexplore::episode::EpisodeError },
    #[error("calibration hit the {cap}-step cap (per-seed steps: {reached:?})")]
    CalibrationTimeout { cap: u64, reached: Vec<Option<u64>> },
    #[error("no episode records to report")]
    EmptyReport,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
