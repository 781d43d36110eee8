//! Controller-facing telemetry: the `(L, Q, U, P)` snapshot and the demand forecast.

use serde::{Deserialize, Serialize};

use crate::sim::{observe_latency, ClusterState, ServiceModel};

/// Finite stand-in for unbounded utilization when no replica is ready.
pub const UTILIZATION_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSnapshot {
    pub t: f64,
    /// Smoothed latency, seconds. Treated as the p95 proxy.
    pub latency: f64,
    /// Queue depth, requests.
    pub queue: f64,
    /// Offered load over ready capacity.
    pub utilization: f64,
    /// Replicas that could not be placed.
    pub pending: u32,
    pub arrival_rate: f64,
    pub ready_replicas: u32,
    /// Backlog growth over the last interval, requests per second. Error-rate
    /// proxy; recorded for audit, not consumed by any controller.
    pub queue_growth: f64,
}

/// Exponentially weighted moving average with weight `alpha` on the newest sample.
pub fn ewma(previous: Option<f64>, sample: f64, alpha: f64) -> f64 {
    match previous {
        Some(prev) => alpha * sample + (1.0 - alpha) * prev,
        None => sample,
    }
}

/// `arrival_rate / (ready · μ)`, capped at [`UTILIZATION_CAP`].
pub fn utilization(arrival_rate: f64, ready: u32, model: &ServiceModel) -> f64 {
    if ready == 0 {
        return if arrival_rate > 0.0 {
            UTILIZATION_CAP
        } else {
            0.0
        };
    }
    (arrival_rate / model.capacity(ready)).min(UTILIZATION_CAP)
}

/// Build a snapshot from raw cluster telemetry.
///
/// `previous_latency` is the EWMA state carried by the control loop; pass
/// `None` on the first sample. `previous_queue` and `interval` feed the
/// queue-growth proxy.
pub fn sample(
    cluster: &ClusterState,
    arrival_rate: f64,
    model: &ServiceModel,
    previous_latency: Option<f64>,
    smoothing: f64,
    previous_queue: f64,
    interval: f64,
) -> SignalSnapshot {
    let ready = cluster.ready_replicas();
    let raw = observe_latency(cluster, arrival_rate, model);
    let latency = if ready == 0 {
        model.latency_cap
    } else {
        ewma(previous_latency, raw, smoothing)
    };
    let utilization = if ready == 0 {
        UTILIZATION_CAP
    } else {
        utilization(arrival_rate, ready, model)
    };
    SignalSnapshot {
        t: cluster.time,
        latency,
        queue: cluster.queue_depth,
        utilization,
        pending: cluster.pending_replicas,
        arrival_rate,
        ready_replicas: ready,
        queue_growth: if interval > 0.0 {
            (cluster.queue_depth - previous_queue) / interval
        } else {
            0.0
        },
    }
}

/// Holt linear (double exponential) smoothing state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastState {
    /// Requests per second.
    pub level: f64,
    /// Change in rate per update step.
    pub trend: f64,
    pub alpha: f64,
    pub beta: f64,
    initialized: bool,
}

impl ForecastState {
    pub fn new(alpha: f64, beta: f64) -> Self {
        ForecastState {
            level: 0.0,
            trend: 0.0,
            alpha: alpha.clamp(0.0, 1.0),
            beta: beta.clamp(0.0, 1.0),
            initialized: false,
        }
    }

    /// State with an explicit starting level and trend.
    pub fn with_level(alpha: f64, beta: f64, level: f64, trend: f64) -> Self {
        ForecastState {
            level,
            trend,
            initialized: true,
            ..ForecastState::new(alpha, beta)
        }
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    /// Fold in one observation. The first observation seeds the level.
    #[must_use]
    pub fn update(self, observed_rate: f64) -> ForecastState {
        let observed_rate = observed_rate.max(0.0);
        if !self.initialized {
            return ForecastState {
                level: observed_rate,
                trend: 0.0,
                initialized: true,
                ..self
            };
        }
        let level = self.alpha * observed_rate + (1.0 - self.alpha) * (self.level + self.trend);
        let trend = self.beta * (level - self.level) + (1.0 - self.beta) * self.trend;
        ForecastState {
            level,
            trend,
            ..self
        }
    }

    /// Predicted rate `horizon` seconds ahead, for updates spaced `step` seconds apart.
    pub fn horizon(&self, horizon: f64, step: f64) -> f64 {
        let steps = if step > 0.0 {
            horizon.max(0.0) / step
        } else {
            0.0
        };
        (self.level + self.trend * steps).max(0.0)
    }
}
