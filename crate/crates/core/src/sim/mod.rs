//! Fixed-step cluster simulator.

mod cluster;
mod engine;
mod latency;

pub use cluster::{ClusterParams, ClusterState, NodeState, NodeStatus, Replica};
pub use engine::{run, RunTrace, TraceRow};
pub use latency::{latency_for, observe_latency, ServiceModel};
