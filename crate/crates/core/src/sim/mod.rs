//! Deterministic multi-robot target search over a hybrid region/position
//! belief.

mod engine;
mod geometry;
mod scenario;
mod trajectory;

pub use engine::{
    replay, run, FactorMessage, MessageRecord, MetricRow, ObservationRecord, RunOptions, RunReport, Simulation,
    Snapshot, SnapshotPhase,
};
pub use geometry::{Point, Polygon};
pub use scenario::{AgentSpec, ExchangeSpec, FusionMode, Scenario, Topology};
pub use trajectory::Trajectory;
