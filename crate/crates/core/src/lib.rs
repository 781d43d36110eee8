//! Cluster elasticity simulator and autoscaling controllers.
//!
//! The crate models a replicated service on a node pool with a fixed-step
//! simulator ([`sim`]), drives it with seedable workloads ([`workload`]),
//! and compares autoscaling policies ([`controllers`]): HPA-style baselines
//! and a staged SLO- and cost-aware pipeline that records every decision.
//! [`metrics`] turns run traces into SLO, responsiveness, cost and
//! stability reports, and [`experiment`] runs whole scenarios to disk.

pub mod controllers;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod scenario;
pub mod signals;
pub mod sim;
pub mod workload;

pub use controllers::{
    Autoscaler, Constraint, ControllerConfig, ControllerKind, DecisionRecord, ScalingAction,
};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentOptions, ExperimentSummary};
pub use metrics::{compare, ComparisonTable, MetricRow, MetricsReport};
pub use scenario::{load_scenario, ClusterConfig, ScenarioConfig};
pub use signals::{ForecastState, SignalSnapshot};
pub use sim::{run, ClusterState, RunTrace, ServiceModel, TraceRow};
pub use workload::{WorkloadKind, WorkloadSpec};
