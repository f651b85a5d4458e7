//! Prediction-based topology control and routing for mobile cognitive
//! radio ad hoc networks.
//!
//! The pipeline is: [`mobility`] produces node trajectories, [`prediction`]
//! estimates how long each link stays available, [`topology`] prunes the
//! link graph while keeping every most-reliable path, [`routing`] drives
//! flows over the result, and [`sim`] ties it all into experiments.

pub mod error;
pub mod graph;
pub mod mobility;
pub mod model;
pub mod prediction;
pub mod rng;
pub mod routing;
pub mod sim;
pub mod stats;
pub mod topology;

pub use error::{ConfigError, MobilityError, PredictionError, SimError, TopologyError};
pub use graph::{LinkGraph, PathInfo, WeightedEdge};
pub use model::{BoundaryPolicy, NodeId, NodeState, PrimaryUser, ScenarioConfig, Vec2};
pub use topology::{build_topology, SymmetryRule, Topology};
