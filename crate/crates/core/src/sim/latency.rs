//! Analytic latency response of a replicated service.
//!
//! Below saturation the response follows an M/M/c-flavored inflation of the
//! unloaded latency plus the time needed to work off the current backlog.
//! At or above saturation the backlog term dominates. Every value is clamped
//! to `latency_cap`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::ClusterState;

/// Per-replica service characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceModel {
    /// Requests per second one ready replica can serve.
    pub per_replica_rate: f64,
    /// Latency of an unloaded replica, in seconds.
    pub base_latency: f64,
    /// Ceiling reported under overload or with zero ready replicas, in seconds.
    pub latency_cap: f64,
}

impl Default for ServiceModel {
    fn default() -> Self {
        ServiceModel {
            per_replica_rate: 10.0,
            base_latency: 0.05,
            latency_cap: 30.0,
        }
    }
}

impl ServiceModel {
    pub fn validate(&self) -> Result<()> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.per_replica_rate) {
            return Err(Error::config(
                "service.per_replica_rate",
                format!("must be > 0, got {}", self.per_replica_rate),
            ));
        }
        if !finite_pos(self.base_latency) {
            return Err(Error::config(
                "service.base_latency",
                format!("must be > 0, got {}", self.base_latency),
            ));
        }
        if !(self.latency_cap.is_finite() && self.latency_cap > self.base_latency) {
            return Err(Error::config(
                "service.latency_cap",
                format!(
                    "must exceed base_latency ({}), got {}",
                    self.base_latency, self.latency_cap
                ),
            ));
        }
        Ok(())
    }

    /// Throughput of `replicas` ready replicas, requests per second.
    pub fn capacity(&self, replicas: u32) -> f64 {
        f64::from(replicas) * self.per_replica_rate
    }
}

/// Latency for `ready` replicas facing `arrival_rate` with `queue_depth` requests waiting.
pub fn latency_for(ready: u32, queue_depth: f64, arrival_rate: f64, model: &ServiceModel) -> f64 {
    if ready == 0 {
        return model.latency_cap;
    }
    let capacity = model.capacity(ready);
    let rho = arrival_rate.max(0.0) / capacity;
    let queue = queue_depth.max(0.0);
    let raw = if rho < 1.0 {
        model.base_latency / (1.0 - rho) + queue / capacity
    } else {
        model.base_latency + (queue + 1.0) / capacity
    };
    raw.min(model.latency_cap)
}

/// Latency the cluster presents to clients at `arrival_rate` requests per second.
pub fn observe_latency(state: &ClusterState, arrival_rate: f64, model: &ServiceModel) -> f64 {
    latency_for(
        state.ready_replicas(),
        state.queue_depth,
        arrival_rate,
        model,
    )
}
