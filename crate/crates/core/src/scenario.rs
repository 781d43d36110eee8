//! Scenario documents: one workload, one cluster, the controllers to compare.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controllers::{ControllerConfig, ControllerKind};
use crate::error::{Error, Result};
use crate::sim::{ClusterParams, ServiceModel};
use crate::workload::WorkloadSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    pub initial_nodes: u32,
    /// Replicas running at `t = 0`, identical for every controller.
    pub initial_replicas: u32,
    pub node_capacity: u32,
    pub max_nodes: u32,
    pub pod_start_delay: f64,
    pub node_provision_delay: f64,
    pub node_idle_timeout: f64,
    /// Seconds replicas must stay pending before the node autoscaler adds nodes.
    pub pending_trigger_delay: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        let p = ClusterParams::default();
        ClusterConfig {
            initial_nodes: 2,
            initial_replicas: 4,
            node_capacity: p.node_capacity,
            max_nodes: p.max_nodes,
            pod_start_delay: p.pod_start_delay,
            node_provision_delay: p.node_provision_delay,
            node_idle_timeout: p.node_idle_timeout,
            pending_trigger_delay: 30.0,
        }
    }
}

impl ClusterConfig {
    pub fn params(&self) -> ClusterParams {
        ClusterParams {
            node_capacity: self.node_capacity,
            max_nodes: self.max_nodes,
            pod_start_delay: self.pod_start_delay,
            node_provision_delay: self.node_provision_delay,
            node_idle_timeout: self.node_idle_timeout,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.node_capacity == 0 {
            return Err(Error::config("cluster.node_capacity", "must be > 0"));
        }
        if self.max_nodes == 0 {
            return Err(Error::config("cluster.max_nodes", "must be > 0"));
        }
        if self.initial_nodes > self.max_nodes {
            return Err(Error::config(
                "cluster.initial_nodes",
                format!(
                    "({}) exceeds max_nodes ({})",
                    self.initial_nodes, self.max_nodes
                ),
            ));
        }
        let delays = [
            ("pod_start_delay", self.pod_start_delay),
            ("node_provision_delay", self.node_provision_delay),
            ("node_idle_timeout", self.node_idle_timeout),
            ("pending_trigger_delay", self.pending_trigger_delay),
        ];
        for (name, v) in delays {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(
                    format!("cluster.{name}"),
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

fn default_horizon() -> f64 {
    3600.0
}

fn default_tick() -> f64 {
    1.0
}

fn default_repeats() -> u32 {
    1
}

fn default_controllers() -> Vec<ControllerKind> {
    vec![
        ControllerKind::DefaultHpa,
        ControllerKind::TunedHpa,
        ControllerKind::HpaVpa,
        ControllerKind::Proposed,
    ]
}

/// A complete experiment description.
///
/// `seed` drives the workload noise; any `workload.seed` is overridden by it
/// so every controller sees the same arrivals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    pub name: String,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_tick")]
    pub tick: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workload: WorkloadSpec,
    #[serde(default)]
    pub service: ServiceModel,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default = "default_controllers")]
    pub controllers: Vec<ControllerKind>,
    #[serde(default = "default_repeats")]
    pub repeats: u32,
}

impl ScenarioConfig {
    /// Scenario with every optional field at its default.
    pub fn with_name(name: impl Into<String>) -> Self {
        ScenarioConfig {
            schema: SCHEMA_VERSION,
            name: name.into(),
            horizon: default_horizon(),
            tick: default_tick(),
            seed: 0,
            workload: WorkloadSpec::default(),
            service: ServiceModel::default(),
            cluster: ClusterConfig::default(),
            controller: ControllerConfig::default(),
            controllers: default_controllers(),
            repeats: default_repeats(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: ScenarioConfig = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Number of ticks in the horizon.
    pub fn ticks(&self) -> u64 {
        ((self.horizon / self.tick) + 1e-9).floor() as u64
    }

    /// Ticks per control interval.
    pub fn interval_ticks(&self) -> u64 {
        (self.controller.control_interval / self.tick)
            .round()
            .max(1.0) as u64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::config(
                "horizon",
                format!("must be > 0, got {}", self.horizon),
            ));
        }
        self.validate_for_run()
    }

    /// All checks except `horizon > 0`; a zero horizon simply yields an empty run.
    pub(crate) fn validate_for_run(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::config(
                "schema",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema
                ),
            ));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name == ".." {
            return Err(Error::config(
                "name",
                "must be non-empty and usable as a directory name",
            ));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::config("horizon", "must be finite and >= 0"));
        }
        if !(self.tick.is_finite() && self.tick > 0.0) {
            return Err(Error::config(
                "tick",
                format!("must be > 0, got {}", self.tick),
            ));
        }
        if self.repeats < 1 {
            return Err(Error::config("repeats", "must be >= 1"));
        }
        if self.controllers.is_empty() {
            return Err(Error::config(
                "controllers",
                "must list at least one controller",
            ));
        }
        self.workload.validate()?;
        self.service.validate()?;
        self.cluster.validate()?;
        self.controller.validate()?;

        let dt = self.controller.control_interval;
        let ratio = dt / self.tick;
        if ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::config(
                "controller.control_interval",
                format!("({dt}) must be a whole multiple of tick ({})", self.tick),
            ));
        }
        let init = self.cluster.initial_replicas;
        if init < self.controller.min_replicas || init > self.controller.max_replicas {
            return Err(Error::config(
                "cluster.initial_replicas",
                format!(
                    "({init}) must lie within [min_replicas, max_replicas] = [{}, {}]",
                    self.controller.min_replicas, self.controller.max_replicas
                ),
            ));
        }
        Ok(())
    }
}

/// Read and validate a scenario document.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    ScenarioConfig::from_json(&text)
}
