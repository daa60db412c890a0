//! Multi-agent exploration: a deterministic grid simulator, occupancy map
//! fusion, fast-marching navigation, frontier-based global planners and the
//! environment surface consumed by a learned planner.

pub mod episode;
pub mod frontier;
pub mod geometry;
pub mod grid;
pub mod mapping;
pub mod metrics;
pub mod nav;
pub mod planners;
pub mod rl_env;
pub mod scene;
pub mod sim;

pub use geometry::{Cell, Point, Pose};
pub use grid::Grid;
pub use mapping::{merge_maps, refine_map, integrate_scan, MapFrame, OccGrid, RefineFrame};
pub use nav::{dilate_obstacles, fmm_field, local_controller, plan_path, DistanceField, NavParams, TraversableMask};
pub use scene::{explorable_area, generate_scene, load_scene, GeneratorParams, Scene};
pub use sim::{Action, AgentState, LocalScan, SimParams, SimState, TeamSchedule};
