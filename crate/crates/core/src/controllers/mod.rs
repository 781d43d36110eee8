//! Autoscaling policies and the structured decision records they emit.

mod guardrails;
mod hpa;
mod pipeline;
mod vpa;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::SignalSnapshot;
use crate::sim::{ClusterParams, ClusterState, ServiceModel};

pub use guardrails::{enforce_guardrails, GuardrailPolicy, ScaleHistory};
pub use hpa::{hpa_desired, HpaController, HpaProfile};
pub use pipeline::{
    adjust_for_backlog, coordinate_actuation, estimate_slo_demand, pipeline_decide, PipelineState,
    ProposedController,
};
pub use vpa::{vpa_recommend, VPA_SAFETY_MARGIN};

/// Which policy drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Fixed replica count; no decisions.
    None,
    DefaultHpa,
    TunedHpa,
    /// Default HPA plus recommendation-only vertical sizing.
    HpaVpa,
    /// Five-stage SLO- and cost-aware pipeline.
    Proposed,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 5] = [
        ControllerKind::None,
        ControllerKind::DefaultHpa,
        ControllerKind::TunedHpa,
        ControllerKind::HpaVpa,
        ControllerKind::Proposed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::None => "none",
            ControllerKind::DefaultHpa => "default_hpa",
            ControllerKind::TunedHpa => "tuned_hpa",
            ControllerKind::HpaVpa => "hpa_vpa",
            ControllerKind::Proposed => "proposed",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ControllerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::config(
                    "controllers",
                    format!(
                        "unknown controller `{s}` (expected one of none, default_hpa, tuned_hpa, hpa_vpa, proposed)"
                    ),
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub min_replicas: u32,
    pub max_replicas: u32,
    /// Seconds between decisions.
    pub control_interval: f64,
    /// Latency SLO, seconds.
    pub slo_latency_target: f64,
    /// Utilization target for the HPA baselines; their profiles override it.
    pub cpu_target: f64,
    pub tolerance_band: f64,
    pub max_step_up: u32,
    pub max_step_down: u32,
    pub scale_up_stabilization: f64,
    pub scale_down_stabilization: f64,
    pub cooldown_after_scale_up: f64,
    /// Seconds within which a backlog should be worked off.
    pub drain_window: f64,
    /// Utilization the pipeline provisions for; the remainder is SLO headroom.
    pub target_utilization: f64,
    pub cost_per_replica_hour: f64,
    pub cost_per_node_hour: f64,
    /// Node ceiling the pipeline respects when sizing capacity hints.
    pub max_nodes: u32,
    /// EWMA weight on the newest latency sample.
    pub latency_smoothing: f64,
    pub forecast_alpha: f64,
    pub forecast_beta: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            min_replicas: 1,
            max_replicas: 64,
            control_interval: 15.0,
            slo_latency_target: 0.2,
            cpu_target: 0.5,
            tolerance_band: 0.1,
            max_step_up: 16,
            max_step_down: 8,
            scale_up_stabilization: 0.0,
            scale_down_stabilization: 120.0,
            cooldown_after_scale_up: 60.0,
            drain_window: 30.0,
            target_utilization: 0.7,
            cost_per_replica_hour: 0.0,
            cost_per_node_hour: 1.0,
            max_nodes: 10,
            latency_smoothing: 0.5,
            forecast_alpha: 0.5,
            forecast_beta: 0.3,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str| format!("controller.{name}");
        if self.min_replicas < 1 {
            return Err(Error::config(field("min_replicas"), "must be >= 1"));
        }
        if self.max_replicas < self.min_replicas {
            return Err(Error::config(
                field("max_replicas"),
                format!("must be >= min_replicas ({})", self.min_replicas),
            ));
        }
        if !(self.control_interval.is_finite() && self.control_interval > 0.0) {
            return Err(Error::config(field("control_interval"), "must be > 0"));
        }
        let positive = [
            ("slo_latency_target", self.slo_latency_target),
            ("cpu_target", self.cpu_target),
            ("drain_window", self.drain_window),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field(name), format!("must be > 0, got {v}")));
            }
        }
        let nonneg = [
            ("tolerance_band", self.tolerance_band),
            ("scale_up_stabilization", self.scale_up_stabilization),
            ("scale_down_stabilization", self.scale_down_stabilization),
            ("cooldown_after_scale_up", self.cooldown_after_scale_up),
            ("cost_per_replica_hour", self.cost_per_replica_hour),
            ("cost_per_node_hour", self.cost_per_node_hour),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(field(name), format!("must be >= 0, got {v}")));
            }
        }
        let unit = [
            ("latency_smoothing", self.latency_smoothing),
            ("forecast_alpha", self.forecast_alpha),
            ("forecast_beta", self.forecast_beta),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(
                    field(name),
                    format!("must lie in [0, 1], got {v}"),
                ));
            }
        }
        if !(self.target_utilization > 0.0 && self.target_utilization <= 1.0) {
            return Err(Error::config(
                field("target_utilization"),
                format!("must lie in (0, 1], got {}", self.target_utilization),
            ));
        }
        if self.max_step_up == 0 || self.max_step_down == 0 {
            return Err(Error::config(
                field("max_step_up"),
                "step limits must be >= 1",
            ));
        }
        Ok(())
    }
}

/// Rules that can shape a decision; recorded whenever one changes the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    BoundClamp,
    StepLimit,
    StabilizationHold,
    CooldownHold,
    CostFloor,
    ToleranceSkip,
}

impl Constraint {
    pub fn describe(self) -> &'static str {
        match self {
            Constraint::BoundClamp => "replica bounds",
            Constraint::StepLimit => "step limit",
            Constraint::StabilizationHold => "stabilization window",
            Constraint::CooldownHold => "scale-up cooldown",
            Constraint::CostFloor => "cost floor",
            Constraint::ToleranceSkip => "tolerance band",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingAction {
    pub target_replicas: u32,
    /// Extra node slots requested because the target is unschedulable.
    pub node_capacity_hint: Option<u32>,
    /// Recommended per-replica request; never applied.
    pub vpa_recommendation: Option<f64>,
}

/// Audit record for one control decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub id: u64,
    pub t: f64,
    pub snapshot: SignalSnapshot,
    pub slo_demand: u32,
    pub backlog_adjusted: u32,
    pub pre_guardrail: u32,
    pub post_guardrail: u32,
    pub constraints_applied: Vec<Constraint>,
    pub action: ScalingAction,
    pub reason: String,
}

/// A replica-count policy invoked once per control interval.
pub trait Autoscaler: Send {
    fn kind(&self) -> ControllerKind;

    /// Produce the decision for this interval. The caller assigns `id`.
    fn decide(&mut self, snapshot: &SignalSnapshot, cluster: &ClusterState) -> DecisionRecord;
}

/// Instantiate a controller, or `None` for [`ControllerKind::None`].
pub fn build(
    kind: ControllerKind,
    cfg: &ControllerConfig,
    cluster: &ClusterParams,
    model: &ServiceModel,
) -> Option<Box<dyn Autoscaler>> {
    match kind {
        ControllerKind::None => None,
        ControllerKind::DefaultHpa => Some(Box::new(HpaController::new(
            kind,
            HpaProfile::default_hpa(),
            cfg,
        ))),
        ControllerKind::TunedHpa => {
            Some(Box::new(HpaController::new(kind, HpaProfile::tuned(), cfg)))
        }
        ControllerKind::HpaVpa => Some(Box::new(HpaController::new(
            kind,
            HpaProfile::default_hpa().with_vpa(),
            cfg,
        ))),
        ControllerKind::Proposed => Some(Box::new(ProposedController::new(
            cfg.clone(),
            *cluster,
            *model,
        ))),
    }
}

/// `ceil` that ignores float noise just above an integer.
pub(crate) fn ceil_count(x: f64) -> u32 {
    if !x.is_finite() || x <= 0.0 {
        return if x == f64::INFINITY { u32::MAX } else { 0 };
    }
    let c = (x - 1e-9).ceil().max(0.0);
    if c >= f64::from(u32::MAX) {
        u32::MAX
    } else {
        c as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in ControllerKind::ALL {
            assert_eq!(k.as_str().parse::<ControllerKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{k}\""));
        }
        assert!("hpa".parse::<ControllerKind>().is_err());
    }

    #[test]
    fn ceil_count_absorbs_float_noise() {
        assert_eq!(ceil_count(28.0 / (10.0 * 0.7)), 4);
        assert_eq!(ceil_count(3.0 * 0.15 / 0.05), 9);
        assert_eq!(ceil_count(4.0001), 5);
        assert_eq!(ceil_count(0.004), 1);
        assert_eq!(ceil_count(0.0), 0);
        assert_eq!(ceil_count(f64::INFINITY), u32::MAX);
    }

    #[test]
    fn config_validation_names_field() {
        let cfg = ControllerConfig {
            max_replicas: 0,
            ..ControllerConfig::default()
        };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("controller.max_replicas"), "{err}");
        ControllerConfig::default().validate().unwrap();
    }
}
