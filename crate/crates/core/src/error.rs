use thiserror::Error;

use crate::model::{NodeId, Violation};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {reason}")]
    BadValue {
        line: usize,
        key: String,
        reason: String,
    },
    #[error("invalid scenario: {}", join(.0))]
    Invalid(Vec<Violation>),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error, PartialEq)]
pub enum MobilityError {
    #[error("time {t} s has not been simulated yet (history ends at {end} s)")]
    NotSimulated { t: f64, end: f64 },
    #[error("sample times must be strictly increasing and evenly spaced: {0:?}")]
    BadSampleTimes([f64; 3]),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown primary user {0}")]
    UnknownPrimaryUser(usize),
    #[error("time {0} s is not on the trajectory grid")]
    OffGrid(f64),
    #[error("could not place node {0} outside every PU disc")]
    PlacementFailed(NodeId),
}

#[derive(Debug, Error, PartialEq)]
pub enum PredictionError {
    #[error("duplicate or decreasing sample times {0:?}")]
    SampleTimes([f64; 3]),
    #[error("negative distance sample {0}")]
    NegativeDistance(f64),
    #[error("{mode} crossing of radius {radius} m requires the pair to be {expected} at t2")]
    Precondition {
        mode: &'static str,
        radius: f64,
        expected: &'static str,
    },
    #[error("{0} PU fits supplied for {1} primary users")]
    PuCountMismatch(usize, usize),
    #[error("only {have} qualifying link observations, need at least {need}")]
    InsufficientData { have: usize, need: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("preserved-neighbor relation is asymmetric: {0} keeps {1} but not the reverse")]
    Asymmetric(NodeId, NodeId),
    #[error("weights differ across ({0}, {1})")]
    AsymmetricWeight(NodeId, NodeId),
    #[error("nodes {0} and {1} are not connected in the original graph")]
    Disconnected(NodeId, NodeId),
    #[error("control intensity is undefined for degree 0")]
    ZeroDegree,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
