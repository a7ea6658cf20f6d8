//! Planar world simulation, episode execution, topological-memory
//! navigation and evaluation.

mod episode;
mod eval;
mod export;
pub mod scenario;
mod topo;
mod world;

pub use episode::{
    detect, observe, run_episode, Controller, Episode, EpisodeCategory, EpisodeRecord, RunParams,
};
pub use eval::{
    collision_ablation, evaluate, read_suite, write_suite, CategoryStats, CollisionAblation,
    EvalReport, EpisodeSummary, REPORT_SCHEMA, REPORT_VERSION, SUITE_SCHEMA, SUITE_VERSION,
};
pub use export::{trajectory_csv, trajectory_svg, TRAJECTORY_SCHEMA, TRAJECTORY_VERSION};
pub use topo::{
    long_distance_navigate, score_nodes, LongDistanceOutcome, LongDistanceParams, NodeObject, NodeScores, SwitchEvent,
    TopoMemory, TopoNode,
};
pub use world::{
    step_world, Bounds, DynamicScript, RecordedPath, StepOutcome, Waypoint, World, WorldFile,
    WorldState, WORLD_SCHEMA, WORLD_VERSION,
};
