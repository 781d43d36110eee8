//! The control loop: arrivals, cluster step, periodic decisions, node autoscaling.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::controllers::{self, ControllerKind, DecisionRecord};
use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;
use crate::signals::{sample, utilization};
use crate::sim::{observe_latency, ClusterState};

/// One line of the run trace. Field names are part of the output format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// End of the tick, seconds.
    pub t: f64,
    pub arrivals: f64,
    pub ready: u32,
    pub starting: u32,
    pub pending: u32,
    pub nodes_active: u32,
    pub queue: f64,
    pub latency: f64,
    pub utilization: f64,
    /// Replica target applied at this tick, when it changed.
    pub action: Option<u32>,
    /// Decision taken at this tick, if any.
    pub decision_id: Option<u64>,
}

impl TraceRow {
    /// The replica target in force: ready + starting + pending.
    pub fn replicas(&self) -> u32 {
        self.ready + self.starting + self.pending
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub scenario: String,
    pub controller: ControllerKind,
    pub seed: u64,
    pub tick: f64,
    pub initial_replicas: u32,
    pub rows: Vec<TraceRow>,
    pub decisions: Vec<DecisionRecord>,
}

impl RunTrace {
    pub fn write_trace_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for row in &self.rows {
            serde_json::to_writer(&mut w, row)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_decisions_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for rec in &self.decisions {
            serde_json::to_writer(&mut w, rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn trace_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_trace_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits utf-8")
    }
}

/// Simulate `scenario` under `kind` for the full horizon.
///
/// Every tick: draw arrivals, step the cluster, and record a trace row. At
/// the end of each control interval the controller decides and its target and
/// node hint are applied. A pending-driven node autoscaler runs for every
/// controller: replicas pending for `pending_trigger_delay` seconds get nodes.
pub fn run(scenario: &ScenarioConfig, kind: ControllerKind) -> Result<RunTrace> {
    scenario.validate_for_run()?;
    let params = scenario.cluster.params();
    let model = scenario.service;
    let cfg = &scenario.controller;
    let mut workload = scenario.workload.clone();
    workload.seed = scenario.seed;

    let mut cluster = ClusterState::new(
        params,
        scenario.cluster.initial_nodes,
        scenario.cluster.initial_replicas,
    );
    let mut controller = controllers::build(kind, cfg, &params, &model);

    let tick = scenario.tick;
    let interval_ticks = scenario.interval_ticks();
    let interval = interval_ticks as f64 * tick;

    let mut trace = RunTrace {
        scenario: scenario.name.clone(),
        controller: kind,
        seed: scenario.seed,
        tick,
        initial_replicas: cluster.desired_replicas(),
        rows: Vec::with_capacity(scenario.ticks() as usize),
        decisions: Vec::new(),
    };

    let mut window_arrivals = 0.0;
    let mut smoothed_latency: Option<f64> = None;
    let mut interval_start_queue = 0.0;
    let mut pending_since: Option<f64> = None;

    for k in 0..scenario.ticks() {
        let start = k as f64 * tick;
        let arrivals = workload.arrivals_at(start, tick)?;
        cluster.step(arrivals, &model, tick)?;
        window_arrivals += arrivals;

        let rate = arrivals / tick;
        let latency = observe_latency(&cluster, rate, &model);
        let util = utilization(rate, cluster.ready_replicas(), &model);

        let mut action = None;
        let mut decision_id = None;
        if (k + 1) % interval_ticks == 0 {
            let interval_rate = window_arrivals / interval;
            window_arrivals = 0.0;
            let snapshot = sample(
                &cluster,
                interval_rate,
                &model,
                smoothed_latency,
                cfg.latency_smoothing,
                interval_start_queue,
                interval,
            );
            smoothed_latency = Some(snapshot.latency);
            interval_start_queue = cluster.queue_depth;

            if let Some(ctrl) = controller.as_mut() {
                let mut record = ctrl.decide(&snapshot, &cluster);
                record.id = trace.decisions.len() as u64 + 1;
                let before = cluster.desired_replicas();
                let target = record.action.target_replicas;
                if target != before {
                    cluster.schedule(target);
                    action = Some(target);
                }
                if let Some(slots) = record.action.node_capacity_hint {
                    let nodes = slots.div_ceil(params.node_capacity);
                    let granted = (0..nodes)
                        .filter_map(|_| cluster.provision_node(params.node_capacity))
                        .count() as u32;
                    if granted < nodes {
                        record.reason.push_str(&format!(
                            "; {} of {nodes} node requests ignored: max_nodes reached",
                            nodes - granted
                        ));
                    }
                }
                decision_id = Some(record.id);
                trace.decisions.push(record);
            }
        }

        if cluster.pending_replicas > 0 {
            let since = *pending_since.get_or_insert(cluster.time);
            if cluster.time - since >= scenario.cluster.pending_trigger_delay - 1e-9 {
                let uncovered = cluster
                    .pending_replicas
                    .saturating_sub(cluster.provisioning_capacity());
                for _ in 0..uncovered.div_ceil(params.node_capacity) {
                    if cluster.provision_node(params.node_capacity).is_none() {
                        break;
                    }
                }
            }
        } else {
            pending_since = None;
        }

        cluster.check_invariants()?;
        if cluster.pending_replicas > 0 && cluster.free_slots() > 0 {
            return Err(Error::Invariant(format!(
                "{} replicas pending with {} free slots at t={}",
                cluster.pending_replicas,
                cluster.free_slots(),
                cluster.time
            )));
        }

        trace.rows.push(TraceRow {
            t: cluster.time,
            arrivals,
            ready: cluster.ready_replicas(),
            starting: cluster.starting_count(),
            pending: cluster.pending_replicas,
            nodes_active: cluster.active_nodes(),
            queue: cluster.queue_depth,
            latency,
            utilization: util,
            action,
            decision_id,
        });
    }
    Ok(trace)
}
