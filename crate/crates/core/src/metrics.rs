//! Trace-derived metrics and cross-controller comparison tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::controllers::{ceil_count, ControllerConfig};
use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;
use crate::sim::{RunTrace, ServiceModel, TraceRow};
use crate::workload::{WorkloadKind, WorkloadSpec};

/// Window within which a direction reversal counts as an oscillation, seconds.
pub const OSCILLATION_WINDOW: f64 = 120.0;

/// Column order of the comparison CSV.
pub const CSV_HEADER: &str =
    "controller,slo_count,slo_duration_s,ttscale_s,node_hours,replica_hours,cost,events,oscillations,churn";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub controller: String,
    pub seed: u64,
    pub slo_violation_count: u64,
    pub slo_violation_duration: f64,
    /// `None` when the workload has no bursts to measure against.
    pub mean_time_to_scale: Option<f64>,
    pub node_hours: f64,
    pub replica_hours: f64,
    pub cost: f64,
    pub scale_event_count: u64,
    pub oscillation_count: u64,
    pub replica_churn: u64,
}

/// Violation episodes: maximal runs of ticks with latency above `target`.
/// Returns `(episodes, total seconds)`.
pub fn slo_violations(rows: &[TraceRow], target: f64, tick: f64) -> (u64, f64) {
    let mut episodes = 0;
    let mut ticks = 0u64;
    let mut in_breach = false;
    for row in rows {
        let breach = row.latency > target;
        if breach {
            ticks += 1;
            if !in_breach {
                episodes += 1;
            }
        }
        in_breach = breach;
    }
    (episodes, ticks as f64 * tick)
}

/// Mean delay from each burst onset until ready replicas first reach the
/// burst's steady demand `ceil(burst_rate / (μ · target_utilization))`.
///
/// Bursts that never reach demand count their full duration. Bursts that end
/// after the trace are skipped. `None` for non-bursty workloads.
pub fn time_to_scale(
    rows: &[TraceRow],
    workload: &WorkloadSpec,
    model: &ServiceModel,
    target_utilization: f64,
) -> Option<f64> {
    if workload.kind != WorkloadKind::Bursty {
        return None;
    }
    let end = rows.last().map_or(0.0, |r| r.t);
    let burst_rate = workload.base_rate * workload.burst_amplitude;
    let demand = ceil_count(burst_rate / (model.per_replica_rate * target_utilization));
    let eps = 1e-9;
    let samples: Vec<f64> = workload
        .burst_onsets(end)
        .into_iter()
        .filter(|onset| onset + workload.burst_duration <= end + eps)
        .map(|onset| {
            let close = onset + workload.burst_duration;
            rows.iter()
                .filter(|r| r.t >= onset - eps && r.t <= close + eps)
                .find(|r| r.ready >= demand)
                .map_or(workload.burst_duration, |r| r.t - onset)
        })
        .collect();
    if samples.is_empty() {
        return None;
    }
    Some(samples.iter().sum::<f64>() / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostMetrics {
    pub node_hours: f64,
    pub replica_hours: f64,
    pub cost: f64,
}

/// Node-hours over active nodes and replica-hours over placed (ready +
/// starting) replicas, priced with the configured hourly rates.
pub fn cost_metrics(rows: &[TraceRow], tick: f64, cfg: &ControllerConfig) -> CostMetrics {
    let node_ticks: u64 = rows.iter().map(|r| u64::from(r.nodes_active)).sum();
    let replica_ticks: u64 = rows.iter().map(|r| u64::from(r.ready + r.starting)).sum();
    let node_hours = node_ticks as f64 * tick / 3600.0;
    let replica_hours = replica_ticks as f64 * tick / 3600.0;
    CostMetrics {
        node_hours,
        replica_hours,
        cost: node_hours * cfg.cost_per_node_hour + replica_hours * cfg.cost_per_replica_hour,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityMetrics {
    pub scale_event_count: u64,
    pub oscillation_count: u64,
    pub replica_churn: u64,
}

/// Scale events are ticks where the replica target changed. An oscillation is
/// an event reversing the previous event's direction within `window` seconds.
pub fn stability_metrics(rows: &[TraceRow], window: f64) -> StabilityMetrics {
    let mut out = StabilityMetrics {
        scale_event_count: 0,
        oscillation_count: 0,
        replica_churn: 0,
    };
    let mut last_event: Option<(f64, bool)> = None;
    for pair in rows.windows(2) {
        let (prev, cur) = (pair[0].replicas(), pair[1].replicas());
        if prev == cur {
            continue;
        }
        let up = cur > prev;
        out.scale_event_count += 1;
        out.replica_churn += u64::from(prev.abs_diff(cur));
        if let Some((t, was_up)) = last_event {
            if was_up != up && pair[1].t - t <= window {
                out.oscillation_count += 1;
            }
        }
        last_event = Some((pair[1].t, up));
    }
    out
}

/// All metric families for one run.
pub fn report(trace: &RunTrace, scenario: &ScenarioConfig) -> MetricsReport {
    let cfg = &scenario.controller;
    let (count, duration) = slo_violations(&trace.rows, cfg.slo_latency_target, trace.tick);
    let cost = cost_metrics(&trace.rows, trace.tick, cfg);
    let stability = stability_metrics(&trace.rows, OSCILLATION_WINDOW);
    MetricsReport {
        controller: trace.controller.to_string(),
        seed: trace.seed,
        slo_violation_count: count,
        slo_violation_duration: duration,
        mean_time_to_scale: time_to_scale(
            &trace.rows,
            &scenario.workload,
            &scenario.service,
            cfg.target_utilization,
        ),
        node_hours: cost.node_hours,
        replica_hours: cost.replica_hours,
        cost: cost.cost,
        scale_event_count: stability.scale_event_count,
        oscillation_count: stability.oscillation_count,
        replica_churn: stability.replica_churn,
    }
}

/// One table row: a controller's metrics, averaged over however many runs.
/// Field names match the CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub controller: String,
    pub slo_count: f64,
    pub slo_duration_s: f64,
    pub ttscale_s: Option<f64>,
    pub node_hours: f64,
    pub replica_hours: f64,
    pub cost: f64,
    pub events: f64,
    pub oscillations: f64,
    pub churn: f64,
}

impl From<&MetricsReport> for MetricRow {
    fn from(r: &MetricsReport) -> Self {
        MetricRow {
            controller: r.controller.clone(),
            slo_count: r.slo_violation_count as f64,
            slo_duration_s: r.slo_violation_duration,
            ttscale_s: r.mean_time_to_scale,
            node_hours: r.node_hours,
            replica_hours: r.replica_hours,
            cost: r.cost,
            events: r.scale_event_count as f64,
            oscillations: r.oscillation_count as f64,
            churn: r.replica_churn as f64,
        }
    }
}

impl MetricRow {
    fn values(&self) -> [Option<f64>; 9] {
        [
            Some(self.slo_count),
            Some(self.slo_duration_s),
            self.ttscale_s,
            Some(self.node_hours),
            Some(self.replica_hours),
            Some(self.cost),
            Some(self.events),
            Some(self.oscillations),
            Some(self.churn),
        ]
    }

    fn from_values(controller: String, v: [Option<f64>; 9]) -> Self {
        MetricRow {
            controller,
            slo_count: v[0].unwrap_or(0.0),
            slo_duration_s: v[1].unwrap_or(0.0),
            ttscale_s: v[2],
            node_hours: v[3].unwrap_or(0.0),
            replica_hours: v[4].unwrap_or(0.0),
            cost: v[5].unwrap_or(0.0),
            events: v[6].unwrap_or(0.0),
            oscillations: v[7].unwrap_or(0.0),
            churn: v[8].unwrap_or(0.0),
        }
    }
}

/// Mean and population standard deviation per controller, in first-seen order.
pub fn aggregate(reports: &[MetricsReport]) -> Vec<(MetricRow, MetricRow)> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<MetricRow>> = BTreeMap::new();
    for r in reports {
        if !groups.contains_key(r.controller.as_str()) {
            order.push(&r.controller);
        }
        groups
            .entry(&r.controller)
            .or_default()
            .push(MetricRow::from(r));
    }
    order
        .into_iter()
        .map(|name| {
            let rows = &groups[name];
            let mut mean = [None; 9];
            let mut std = [None; 9];
            for i in 0..9 {
                let xs: Vec<f64> = rows.iter().filter_map(|r| r.values()[i]).collect();
                if xs.is_empty() {
                    continue;
                }
                let m = xs.iter().sum::<f64>() / xs.len() as f64;
                let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
                mean[i] = Some(m);
                std[i] = Some(var.sqrt());
            }
            (
                MetricRow::from_values(name.to_string(), mean),
                MetricRow::from_values(name.to_string(), std),
            )
        })
        .collect()
}

/// Relative reduction versus the baseline; `None` when the baseline is zero.
pub fn reduction(baseline: f64, value: f64) -> Option<f64> {
    (baseline != 0.0).then(|| (baseline - value) / baseline)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    #[serde(flatten)]
    pub metrics: MetricRow,
    pub slo_count_reduction: Option<f64>,
    pub slo_duration_reduction: Option<f64>,
    pub ttscale_reduction: Option<f64>,
    pub node_hours_reduction: Option<f64>,
    pub cost_reduction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub baseline: String,
    pub rows: Vec<ComparisonRow>,
}

/// Rows with reductions relative to the first entry, the baseline.
pub fn compare(rows: &[MetricRow]) -> Result<ComparisonTable> {
    let Some(base) = rows.first() else {
        return Err(Error::InvalidInput(
            "comparison needs a baseline row".into(),
        ));
    };
    if rows.len() < 2 {
        return Err(Error::InvalidInput(
            "comparison needs at least two controllers".into(),
        ));
    }
    let rows = rows
        .iter()
        .map(|m| ComparisonRow {
            metrics: m.clone(),
            slo_count_reduction: reduction(base.slo_count, m.slo_count),
            slo_duration_reduction: reduction(base.slo_duration_s, m.slo_duration_s),
            ttscale_reduction: match (base.ttscale_s, m.ttscale_s) {
                (Some(b), Some(v)) => reduction(b, v),
                _ => None,
            },
            node_hours_reduction: reduction(base.node_hours, m.node_hours),
            cost_reduction: reduction(base.cost, m.cost),
        })
        .collect();
    Ok(ComparisonTable {
        baseline: base.controller.clone(),
        rows,
    })
}

/// Convenience wrapper over [`compare`] for single-run reports.
pub fn compare_reports(reports: &[MetricsReport]) -> Result<ComparisonTable> {
    let rows: Vec<MetricRow> = reports.iter().map(MetricRow::from).collect();
    compare(&rows)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{:.1}%", 100.0 * x))
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let m = &row.metrics;
            let cells: Vec<String> = std::iter::once(m.controller.clone())
                .chain(m.values().into_iter().map(cell))
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Human-readable summary table.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("| controller | SLO count | SLO s | red. | time-to-scale s | red. | node-h | red. | osc. | churn |\n");
        out.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
        for row in &self.rows {
            let m = &row.metrics;
            let _ = writeln!(
                out,
                "| {} | {:.1} | {:.0} | {} | {} | {} | {:.2} | {} | {:.1} | {:.0} |",
                m.controller,
                m.slo_count,
                m.slo_duration_s,
                pct(row.slo_duration_reduction),
                m.ttscale_s
                    .map_or_else(|| "n/a".into(), |v| format!("{v:.1}")),
                pct(row.ttscale_reduction),
                m.node_hours,
                pct(row.node_hours_reduction),
                m.oscillations,
                m.churn,
            );
        }
        out
    }
}
