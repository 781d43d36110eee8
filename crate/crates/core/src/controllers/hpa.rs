//! Utilization-ratio autoscalers modeled on the upstream HPA.

use std::collections::VecDeque;

use super::guardrails::{enforce_guardrails, GuardrailPolicy, ScaleHistory};
use super::vpa::vpa_recommend;
use super::{
    ceil_count, Autoscaler, ControllerConfig, ControllerKind, DecisionRecord, ScalingAction,
};
use crate::signals::SignalSnapshot;
use crate::sim::ClusterState;

/// Usage samples kept for the vertical recommender (10 minutes at a 15 s interval).
const VPA_HISTORY: usize = 40;

fn within_tolerance(metric: f64, target: f64, tolerance: f64) -> bool {
    (metric / target - 1.0).abs() <= tolerance + 1e-9
}

/// CPU busy fraction seen by the baselines. Offered load beyond capacity
/// queues up instead of showing as usage, so the signal saturates at 1.
pub fn cpu_utilization(s: &SignalSnapshot) -> f64 {
    s.utilization.min(1.0)
}

/// Ratio rule: `ceil(current · metric / target)`, unchanged inside the tolerance band.
pub fn hpa_desired(current: u32, metric: f64, target: f64, tolerance: f64) -> u32 {
    if within_tolerance(metric, target, tolerance) {
        return current;
    }
    ceil_count(f64::from(current) * metric / target)
}

/// Parameters that distinguish the HPA variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpaProfile {
    pub cpu_target: f64,
    pub scale_up_stabilization: f64,
    pub scale_down_stabilization: f64,
    /// Fixed per-decision growth limit. `None` uses the upstream default
    /// policy: the larger of 4 replicas or 100% of the current count.
    pub max_step_up: Option<u32>,
    pub vpa: bool,
}

impl HpaProfile {
    pub fn default_hpa() -> Self {
        HpaProfile {
            cpu_target: 0.5,
            scale_up_stabilization: 0.0,
            scale_down_stabilization: 300.0,
            max_step_up: None,
            vpa: false,
        }
    }

    /// Hand-tuned for spiky traffic: more headroom per replica and a shorter
    /// scale-down window, with the upstream growth policy.
    pub fn tuned() -> Self {
        HpaProfile {
            cpu_target: 0.45,
            scale_down_stabilization: 120.0,
            ..HpaProfile::default_hpa()
        }
    }

    pub fn with_vpa(self) -> Self {
        HpaProfile { vpa: true, ..self }
    }
}

pub struct HpaController {
    kind: ControllerKind,
    profile: HpaProfile,
    min_replicas: u32,
    max_replicas: u32,
    tolerance: f64,
    history: ScaleHistory,
    usage: VecDeque<f64>,
}

impl HpaController {
    pub fn new(kind: ControllerKind, profile: HpaProfile, cfg: &ControllerConfig) -> Self {
        HpaController {
            kind,
            profile,
            min_replicas: cfg.min_replicas,
            max_replicas: cfg.max_replicas,
            tolerance: cfg.tolerance_band,
            history: ScaleHistory::default(),
            usage: VecDeque::with_capacity(VPA_HISTORY),
        }
    }

    fn policy(&self, current: u32) -> GuardrailPolicy {
        GuardrailPolicy {
            min_replicas: self.min_replicas,
            max_replicas: self.max_replicas,
            max_step_up: self.profile.max_step_up.unwrap_or(current.max(4)),
            max_step_down: self.max_replicas,
            scale_up_stabilization: self.profile.scale_up_stabilization,
            scale_down_stabilization: self.profile.scale_down_stabilization,
            cooldown_after_scale_up: 0.0,
            scale_down_tolerance: None,
            cost_aware: false,
        }
    }
}

impl Autoscaler for HpaController {
    fn kind(&self) -> ControllerKind {
        self.kind
    }

    fn decide(&mut self, s: &SignalSnapshot, cluster: &ClusterState) -> DecisionRecord {
        let current = cluster.desired_replicas();
        let target = self.profile.cpu_target;
        let cpu = cpu_utilization(s);
        // The ratio is taken over ready replicas; starting ones report no usage.
        let proposal = if within_tolerance(cpu, target, self.tolerance) {
            current
        } else if s.ready_replicas == 0 {
            current.max(self.min_replicas)
        } else {
            hpa_desired(s.ready_replicas, cpu, target, self.tolerance)
        };

        let policy = self.policy(current);
        let keep = policy
            .scale_up_stabilization
            .max(policy.scale_down_stabilization);
        if self.history.is_empty() {
            // the starting replica count counts as a recommendation made at t = 0
            self.history.record(0.0, current, current, current, keep);
        }
        let (post, constraints) =
            enforce_guardrails(proposal, current, s.t, &policy, &self.history);
        self.history.record(s.t, proposal, current, post, keep);

        let vpa_recommendation = if self.profile.vpa {
            if self.usage.len() == VPA_HISTORY {
                self.usage.pop_front();
            }
            self.usage.push_back(cpu);
            vpa_recommend(self.usage.make_contiguous(), 1.0)
        } else {
            None
        };

        let reason = if post == current {
            match constraints.first() {
                Some(c) => format!("holding at {current} replicas: {}", c.describe()),
                None => format!(
                    "cpu {cpu:.2} within tolerance of target {target:.2}; holding at {current}"
                ),
            }
        } else if let Some(c) = constraints.last() {
            format!(
                "cpu {cpu:.2} vs target {target:.2} asks for {proposal}; {} sets {post}",
                c.describe()
            )
        } else {
            format!("cpu {cpu:.2} vs target {target:.2}: scaling {current} -> {post}")
        };

        DecisionRecord {
            id: 0,
            t: s.t,
            snapshot: *s,
            slo_demand: proposal,
            backlog_adjusted: proposal,
            pre_guardrail: proposal,
            post_guardrail: post,
            constraints_applied: constraints,
            action: ScalingAction {
                target_replicas: post,
                node_capacity_hint: None,
                vpa_recommendation,
            },
            reason,
        }
    }
}
