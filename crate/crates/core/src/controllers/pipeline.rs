//! The five-stage SLO- and cost-aware scaling pipeline.
//!
//! 1. signal aggregation (the [`SignalSnapshot`] handed in by the run loop)
//! 2. SLO-driven demand: forecast capacity floor, raised by latency severity
//! 3. backlog adjustment: enough replicas to sustain arrivals and drain the queue
//! 4. guardrails: cooldown, stabilization, tolerance, step and bound limits
//! 5. coordinated actuation: pod target plus a node capacity hint when the
//!    target cannot be placed
//!
//! Each stage's output lands in the [`DecisionRecord`], so a decision can be
//! replayed and audited stage by stage.

use serde::{Deserialize, Serialize};

use super::guardrails::{enforce_guardrails, GuardrailPolicy, ScaleHistory};
use super::{
    ceil_count, Autoscaler, Constraint, ControllerConfig, ControllerKind, DecisionRecord,
    ScalingAction,
};
use crate::signals::{ForecastState, SignalSnapshot};
use crate::sim::{ClusterParams, ClusterState, ServiceModel};

/// Stage 2. Replicas needed to hold the forecast rate at the target
/// utilization; when latency already breaches the SLO, at least the ready
/// count scaled by the breach severity `L / L_target`.
pub fn estimate_slo_demand(
    s: &SignalSnapshot,
    cfg: &ControllerConfig,
    predicted_rate: f64,
    per_replica_rate: f64,
) -> u32 {
    let capacity_floor = ceil_count(predicted_rate / (per_replica_rate * cfg.target_utilization));
    if s.latency > cfg.slo_latency_target {
        let severity = s.latency / cfg.slo_latency_target;
        capacity_floor.max(ceil_count(f64::from(s.ready_replicas) * severity))
    } else {
        capacity_floor
    }
}

/// Stage 3. With a backlog, raise `n` to sustain current arrivals and work
/// off the queue within `drain_window`.
pub fn adjust_for_backlog(
    n: u32,
    s: &SignalSnapshot,
    cfg: &ControllerConfig,
    per_replica_rate: f64,
) -> u32 {
    if s.queue <= 0.0 {
        return n;
    }
    let drain = s.arrival_rate / per_replica_rate + s.queue / (per_replica_rate * cfg.drain_window);
    n.max(ceil_count(drain))
}

/// Stage 5. Emit the pod target, plus a node hint sized to the fewest whole
/// nodes that cover the unplaceable remainder. The second value explains a
/// suppressed or truncated hint.
pub fn coordinate_actuation(
    target: u32,
    cluster: &ClusterState,
    cfg: &ControllerConfig,
) -> (ScalingAction, Option<String>) {
    let mut action = ScalingAction {
        target_replicas: target,
        node_capacity_hint: None,
        vpa_recommendation: None,
    };
    let placeable =
        cluster.placed_replicas() + cluster.free_slots() + cluster.provisioning_capacity();
    let shortfall = target.saturating_sub(placeable);
    if shortfall == 0 {
        return (action, None);
    }
    let node_capacity = cluster.params.node_capacity.max(1);
    let needed = shortfall.div_ceil(node_capacity);
    let ceiling = cfg.max_nodes.min(cluster.params.max_nodes);
    let room = ceiling.saturating_sub(cluster.live_nodes());
    if room == 0 {
        return (
            action,
            Some(format!(
                "{shortfall} replicas unschedulable but max_nodes ({ceiling}) reached; no node hint"
            )),
        );
    }
    let granted = needed.min(room);
    action.node_capacity_hint = Some(granted * node_capacity);
    let note = (granted < needed).then(|| {
        format!("node hint truncated to {granted} of {needed} nodes by max_nodes ({ceiling})")
    });
    (action, note)
}

/// State threaded between decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineState {
    pub forecast: ForecastState,
    pub history: ScaleHistory,
}

impl PipelineState {
    pub fn new(cfg: &ControllerConfig) -> Self {
        PipelineState {
            forecast: ForecastState::new(cfg.forecast_alpha, cfg.forecast_beta),
            history: ScaleHistory::default(),
        }
    }
}

/// One pass through all five stages. Pure: the returned state replaces `state`.
pub fn pipeline_decide(
    s: &SignalSnapshot,
    cfg: &ControllerConfig,
    state: &PipelineState,
    cluster: &ClusterState,
    model: &ServiceModel,
) -> (DecisionRecord, PipelineState) {
    let mut next = state.clone();
    let mu = model.per_replica_rate;
    let current = cluster.desired_replicas();
    let policy = GuardrailPolicy::from(cfg);
    let keep = cfg.scale_up_stabilization.max(cfg.scale_down_stabilization);
    if next.history.is_empty() {
        next.history.record(0.0, current, current, current, keep);
    }

    next.forecast = next.forecast.update(s.arrival_rate);
    // the forecast may raise the plan above the observed rate but never lower it
    let predicted = next
        .forecast
        .horizon(cluster.params.pod_start_delay, cfg.control_interval)
        .max(s.arrival_rate);

    let slo_demand = estimate_slo_demand(s, cfg, predicted, mu);
    let backlog_adjusted = adjust_for_backlog(slo_demand, s, cfg, mu);
    let pre_guardrail = backlog_adjusted;
    let (post_guardrail, constraints) =
        enforce_guardrails(pre_guardrail, current, s.t, &policy, &next.history);
    next.history
        .record(s.t, pre_guardrail, current, post_guardrail, keep);

    let (action, note) = coordinate_actuation(post_guardrail, cluster, cfg);

    let driver = if backlog_adjusted > slo_demand {
        format!(
            "backlog of {:.0} requests needs {backlog_adjusted}",
            s.queue
        )
    } else if s.latency > cfg.slo_latency_target && slo_demand > current {
        format!(
            "latency {:.3}s breaches SLO {:.3}s; demand {slo_demand}",
            s.latency, cfg.slo_latency_target
        )
    } else {
        format!("forecast {predicted:.1} req/s needs {slo_demand}")
    };
    let mut reason = match constraints
        .iter()
        .rev()
        .find(|c| **c != Constraint::CostFloor)
    {
        Some(binding) => format!(
            "{driver}; {} holds target at {post_guardrail} (current {current})",
            binding.describe()
        ),
        None if post_guardrail < current => {
            format!("{driver}; cost floor releases {current} -> {post_guardrail}")
        }
        None if post_guardrail > current => {
            format!("{driver}; scaling {current} -> {post_guardrail}")
        }
        None => format!("{driver}; no change at {current}"),
    };
    if let Some(hint) = action.node_capacity_hint {
        reason.push_str(&format!("; requesting {hint} node slots"));
    }
    if let Some(note) = note {
        reason.push_str("; ");
        reason.push_str(&note);
    }

    let record = DecisionRecord {
        id: 0,
        t: s.t,
        snapshot: *s,
        slo_demand,
        backlog_adjusted,
        pre_guardrail,
        post_guardrail,
        constraints_applied: constraints,
        action,
        reason,
    };
    (record, next)
}

/// [`pipeline_decide`] wrapped as a stateful [`Autoscaler`].
pub struct ProposedController {
    cfg: ControllerConfig,
    model: ServiceModel,
    state: PipelineState,
}

impl ProposedController {
    pub fn new(cfg: ControllerConfig, _cluster: ClusterParams, model: ServiceModel) -> Self {
        let state = PipelineState::new(&cfg);
        ProposedController { cfg, model, state }
    }

    pub fn state(&self) -> &PipelineState {
        &self.state
    }
}

impl Autoscaler for ProposedController {
    fn kind(&self) -> ControllerKind {
        ControllerKind::Proposed
    }

    fn decide(&mut self, s: &SignalSnapshot, cluster: &ClusterState) -> DecisionRecord {
        let (record, next) = pipeline_decide(s, &self.cfg, &self.state, cluster, &self.model);
        self.state = next;
        record
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(latency: f64, ready: u32, queue: f64, arrival_rate: f64) -> SignalSnapshot {
        SignalSnapshot {
            t: 15.0,
            latency,
            queue,
            utilization: 0.0,
            pending: 0,
            arrival_rate,
            ready_replicas: ready,
            queue_growth: 0.0,
        }
    }

    fn cfg() -> ControllerConfig {
        ControllerConfig::default()
    }

    #[test]
    fn demand_capacity_floor_only() {
        assert_eq!(
            estimate_slo_demand(&snap(0.1, 4, 0.0, 28.0), &cfg(), 28.0, 10.0),
            4
        );
    }

    #[test]
    fn demand_severity_branch() {
        assert_eq!(
            estimate_slo_demand(&snap(0.3, 4, 0.0, 28.0), &cfg(), 28.0, 10.0),
            6
        );
    }

    #[test]
    fn demand_at_exact_target_uses_floor() {
        assert_eq!(
            estimate_slo_demand(&snap(0.2, 40, 0.0, 28.0), &cfg(), 28.0, 10.0),
            4
        );
    }

    #[test]
    fn backlog_examples() {
        assert_eq!(
            adjust_for_backlog(3, &snap(0.1, 4, 0.0, 40.0), &cfg(), 10.0),
            3
        );
        let c = ControllerConfig {
            drain_window: 25.0,
            ..cfg()
        };
        assert_eq!(
            adjust_for_backlog(3, &snap(0.1, 4, 500.0, 40.0), &c, 10.0),
            6
        );
        assert_eq!(
            adjust_for_backlog(9, &snap(0.1, 4, 500.0, 40.0), &c, 10.0),
            9
        );
        assert_eq!(adjust_for_backlog(0, &snap(0.1, 4, 1.0, 0.0), &c, 10.0), 1);
    }

    fn cluster(ready: u32, free: u32, node_capacity: u32) -> ClusterState {
        // one node sized to hold exactly `ready + free`
        let p = ClusterParams {
            node_capacity: ready + free,
            max_nodes: 4,
            ..ClusterParams::default()
        };
        let mut c = ClusterState::new(p, 1, ready);
        c.params.node_capacity = node_capacity;
        c
    }

    #[test]
    fn actuation_without_shortfall() {
        let (a, note) = coordinate_actuation(6, &cluster(4, 2, 8), &cfg());
        assert_eq!(a.node_capacity_hint, None);
        assert!(note.is_none());
    }

    #[test]
    fn actuation_hints_whole_nodes() {
        let (a, _) = coordinate_actuation(12, &cluster(4, 2, 8), &cfg());
        assert_eq!(a.node_capacity_hint, Some(8));
        let (a, _) = coordinate_actuation(21, &cluster(4, 2, 8), &cfg());
        assert_eq!(a.node_capacity_hint, Some(16));
    }

    #[test]
    fn actuation_respects_max_nodes() {
        let c = ControllerConfig {
            max_nodes: 1,
            ..cfg()
        };
        let (a, note) = coordinate_actuation(12, &cluster(4, 2, 8), &c);
        assert_eq!(a.node_capacity_hint, None);
        assert!(note.unwrap().contains("max_nodes"));
    }

    #[test]
    fn actuation_counts_nodes_in_flight() {
        let mut c = cluster(4, 2, 8);
        c.provision_node(8).unwrap();
        let (a, _) = coordinate_actuation(12, &c, &cfg());
        assert_eq!(a.node_capacity_hint, None);
    }

    #[test]
    fn quiet_path_targets_capacity_floor() {
        let c = ClusterState::new(ClusterParams::default(), 2, 4);
        let s = snap(0.1, 4, 0.0, 28.0);
        let (rec, _) = pipeline_decide(
            &s,
            &cfg(),
            &PipelineState::new(&cfg()),
            &c,
            &ServiceModel::default(),
        );
        assert_eq!(rec.action.target_replicas, 4);
        assert!(rec.constraints_applied.is_empty());
        assert_eq!(rec.slo_demand, 4);
        assert_eq!(rec.pre_guardrail, rec.backlog_adjusted);
    }

    #[test]
    fn decide_is_pure() {
        let c = ClusterState::new(ClusterParams::default(), 2, 4);
        let s = snap(0.5, 4, 300.0, 90.0);
        let st = PipelineState::new(&cfg());
        let a = pipeline_decide(&s, &cfg(), &st, &c, &ServiceModel::default());
        let b = pipeline_decide(&s, &cfg(), &st, &c, &ServiceModel::default());
        assert_eq!(a, b);
        assert!(a.0.backlog_adjusted >= a.0.slo_demand);
    }
}
