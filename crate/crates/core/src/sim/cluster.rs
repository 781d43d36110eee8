//! Cluster state: nodes, replica placement, request backlog.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::ServiceModel;

/// Timing slack when comparing simulated timestamps built from float sums.
const TIME_EPS: f64 = 1e-9;

/// Static cluster parameters shared by every run of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    /// Replica slots per node.
    pub node_capacity: u32,
    /// Upper bound on active plus provisioning nodes.
    pub max_nodes: u32,
    /// Seconds from placement until a replica serves traffic.
    pub pod_start_delay: f64,
    /// Seconds from a provisioning request until the node accepts placements.
    pub node_provision_delay: f64,
    /// Seconds an empty node stays active before it is released.
    pub node_idle_timeout: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            node_capacity: 8,
            max_nodes: 10,
            pod_start_delay: 15.0,
            node_provision_delay: 60.0,
            node_idle_timeout: 300.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Provisioning,
    Active,
    Released,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: u32,
    pub capacity: u32,
    pub used: u32,
    /// Time the node became active, if it has.
    pub active_since: Option<f64>,
    /// Time the node is (or was) ready to accept placements.
    pub provisioned_at: f64,
    pub status: NodeStatus,
    idle_since: Option<f64>,
}

impl NodeState {
    pub fn is_active(&self) -> bool {
        self.status == NodeStatus::Active
    }

    pub fn free(&self) -> u32 {
        if self.is_active() {
            self.capacity - self.used
        } else {
            0
        }
    }
}

/// One placed replica. Replicas are kept in creation order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Replica {
    pub node: u32,
    pub ready_at: f64,
}

/// Full mutable state of the simulated cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub time: f64,
    pub params: ClusterParams,
    /// Placed replicas (ready and starting), oldest first.
    pub replicas: Vec<Replica>,
    pub nodes: Vec<NodeState>,
    /// Requests waiting for service (Q).
    pub queue_depth: f64,
    /// Desired replicas that could not be placed (P).
    pub pending_replicas: u32,
    pub cumulative_served: f64,
    pub cumulative_arrived: f64,
    next_node_id: u32,
}

impl ClusterState {
    /// A cluster at `t = 0` with `initial_nodes` active nodes and `initial_replicas`
    /// already running. Replicas that do not fit start out pending.
    pub fn new(params: ClusterParams, initial_nodes: u32, initial_replicas: u32) -> Self {
        let mut state = ClusterState {
            time: 0.0,
            params,
            replicas: Vec::new(),
            nodes: Vec::new(),
            queue_depth: 0.0,
            pending_replicas: 0,
            cumulative_served: 0.0,
            cumulative_arrived: 0.0,
            next_node_id: 0,
        };
        for _ in 0..initial_nodes.min(params.max_nodes) {
            let id = state.alloc_node_id();
            state.nodes.push(NodeState {
                id,
                capacity: params.node_capacity,
                used: 0,
                active_since: Some(0.0),
                provisioned_at: 0.0,
                status: NodeStatus::Active,
                idle_since: Some(0.0),
            });
        }
        let placed = state.place(initial_replicas, 0.0);
        state.pending_replicas = initial_replicas - placed;
        state
    }

    fn alloc_node_id(&mut self) -> u32 {
        let id = self.next_node_id;
        self.next_node_id += 1;
        id
    }

    pub fn ready_replicas(&self) -> u32 {
        self.replicas
            .iter()
            .filter(|r| r.ready_at <= self.time + TIME_EPS)
            .count() as u32
    }

    pub fn starting_count(&self) -> u32 {
        self.replicas.len() as u32 - self.ready_replicas()
    }

    /// Starting replicas grouped by ready time, earliest first.
    pub fn starting_replicas(&self) -> Vec<(u32, f64)> {
        let mut groups: Vec<(u32, f64)> = Vec::new();
        let mut times: Vec<f64> = self
            .replicas
            .iter()
            .filter(|r| r.ready_at > self.time + TIME_EPS)
            .map(|r| r.ready_at)
            .collect();
        times.sort_by(f64::total_cmp);
        for t in times {
            match groups.last_mut() {
                Some((n, at)) if (*at - t).abs() <= TIME_EPS => *n += 1,
                _ => groups.push((1, t)),
            }
        }
        groups
    }

    pub fn placed_replicas(&self) -> u32 {
        self.replicas.len() as u32
    }

    /// Ready + starting + pending: the replica target currently in force.
    pub fn desired_replicas(&self) -> u32 {
        self.placed_replicas() + self.pending_replicas
    }

    pub fn active_nodes(&self) -> u32 {
        self.nodes.iter().filter(|n| n.is_active()).count() as u32
    }

    pub fn provisioning_nodes(&self) -> u32 {
        self.nodes
            .iter()
            .filter(|n| n.status == NodeStatus::Provisioning)
            .count() as u32
    }

    /// Slots that will appear once in-flight nodes activate.
    pub fn provisioning_capacity(&self) -> u32 {
        self.nodes
            .iter()
            .filter(|n| n.status == NodeStatus::Provisioning)
            .map(|n| n.capacity)
            .sum()
    }

    pub fn free_slots(&self) -> u32 {
        self.nodes.iter().map(NodeState::free).sum()
    }

    /// Nodes counted against `max_nodes`.
    pub fn live_nodes(&self) -> u32 {
        self.active_nodes() + self.provisioning_nodes()
    }

    /// First-fit placement of up to `count` replicas over active nodes in id order.
    /// Returns how many were placed.
    fn place(&mut self, count: u32, ready_at: f64) -> u32 {
        let mut placed = 0;
        for node in self.nodes.iter_mut().filter(|n| n.is_active()) {
            while placed < count && node.used < node.capacity {
                node.used += 1;
                node.idle_since = None;
                self.replicas.push(Replica {
                    node: node.id,
                    ready_at,
                });
                placed += 1;
            }
            if placed == count {
                break;
            }
        }
        placed
    }

    fn place_pending(&mut self) {
        if self.pending_replicas == 0 {
            return;
        }
        let ready_at = self.time + self.params.pod_start_delay;
        let placed = self.place(self.pending_replicas, ready_at);
        self.pending_replicas -= placed;
    }

    /// Advance the cluster by `dt` seconds while `arrivals` requests arrive.
    pub fn step(&mut self, arrivals: f64, model: &ServiceModel, dt: f64) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidInput(format!(
                "time step must be > 0, got {dt}"
            )));
        }
        if !arrivals.is_finite() || arrivals < 0.0 {
            return Err(Error::InvalidInput(format!(
                "arrivals must be finite and >= 0, got {arrivals}"
            )));
        }
        self.time += dt;

        for node in &mut self.nodes {
            if node.status == NodeStatus::Provisioning
                && node.provisioned_at <= self.time + TIME_EPS
            {
                node.status = NodeStatus::Active;
                node.active_since = Some(node.provisioned_at);
                node.idle_since = Some(node.provisioned_at);
            }
        }
        self.place_pending();

        let capacity = model.capacity(self.ready_replicas()) * dt;
        let offered = self.queue_depth + arrivals;
        let served = offered.min(capacity);
        self.queue_depth = offered - served;
        self.cumulative_arrived += arrivals;
        self.cumulative_served += served;

        let now = self.time;
        let timeout = self.params.node_idle_timeout;
        for node in self.nodes.iter_mut().filter(|n| n.is_active()) {
            if node.used > 0 {
                node.idle_since = None;
                continue;
            }
            let since = *node.idle_since.get_or_insert(now);
            if now - since >= timeout - TIME_EPS {
                node.status = NodeStatus::Released;
                node.idle_since = None;
            }
        }
        Ok(())
    }

    /// Move the replica target to `desired`.
    ///
    /// Growth is placed first-fit and becomes ready after the pod start delay;
    /// whatever does not fit is left pending. Shrinking drops pending replicas
    /// first, then removes placed replicas newest-first, immediately.
    pub fn schedule(&mut self, desired: u32) {
        let placed = self.placed_replicas();
        if desired >= placed {
            let wanted = desired - placed;
            let ready_at = self.time + self.params.pod_start_delay;
            let newly = self.place(wanted, ready_at);
            self.pending_replicas = wanted - newly;
            return;
        }
        self.pending_replicas = 0;
        for _ in desired..placed {
            let Some(victim) = self.replicas.pop() else {
                break;
            };
            if let Some(node) = self.nodes.iter_mut().find(|n| n.id == victim.node) {
                node.used -= 1;
            }
        }
    }

    /// Request a node of `capacity` slots. Returns the new node id, or `None`
    /// when `max_nodes` live nodes already exist.
    pub fn provision_node(&mut self, capacity: u32) -> Option<u32> {
        if capacity == 0 || self.live_nodes() >= self.params.max_nodes {
            return None;
        }
        let id = self.alloc_node_id();
        self.nodes.push(NodeState {
            id,
            capacity,
            used: 0,
            active_since: None,
            provisioned_at: self.time + self.params.node_provision_delay,
            status: NodeStatus::Provisioning,
            idle_since: None,
        });
        Some(id)
    }

    /// Check conservation and placement soundness.
    pub fn check_invariants(&self) -> Result<()> {
        let balance = self.cumulative_served + self.queue_depth;
        let scale = self.cumulative_arrived.abs().max(1.0);
        if (self.cumulative_arrived - balance).abs() > 1e-9 * scale {
            return Err(Error::Invariant(format!(
                "conservation: arrived {} != served {} + queue {}",
                self.cumulative_arrived, self.cumulative_served, self.queue_depth
            )));
        }
        if self.queue_depth < 0.0 {
            return Err(Error::Invariant(format!(
                "negative queue {}",
                self.queue_depth
            )));
        }
        for node in &self.nodes {
            if node.used > node.capacity {
                return Err(Error::Invariant(format!(
                    "node {} over capacity: {}/{}",
                    node.id, node.used, node.capacity
                )));
            }
            let hosted = self.replicas.iter().filter(|r| r.node == node.id).count() as u32;
            if hosted != node.used {
                return Err(Error::Invariant(format!(
                    "node {} reports {} used but hosts {}",
                    node.id, node.used, hosted
                )));
            }
            if hosted > 0 && !node.is_active() {
                return Err(Error::Invariant(format!(
                    "node {} hosts replicas while {:?}",
                    node.id, node.status
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ServiceModel {
        ServiceModel::default()
    }

    fn params() -> ClusterParams {
        ClusterParams {
            node_capacity: 8,
            max_nodes: 4,
            pod_start_delay: 15.0,
            node_provision_delay: 60.0,
            node_idle_timeout: 300.0,
        }
    }

    /// `ready` running replicas with exactly `free` open slots on one active node.
    fn cluster_with(ready: u32, free: u32) -> ClusterState {
        let p = ClusterParams {
            node_capacity: ready + free,
            ..params()
        };
        ClusterState::new(p, 1, ready)
    }

    #[test]
    fn empty_system_stays_empty() {
        let mut c = cluster_with(2, 6);
        c.step(0.0, &model(), 1.0).unwrap();
        assert_eq!(c.queue_depth, 0.0);
        assert_eq!(c.cumulative_served, 0.0);
    }

    #[test]
    fn overload_builds_backlog() {
        let mut c = cluster_with(2, 6);
        c.step(30.0, &model(), 1.0).unwrap();
        assert_eq!(c.cumulative_served, 20.0);
        assert_eq!(c.queue_depth, 10.0);
    }

    #[test]
    fn backlog_drains_with_capacity() {
        let mut c = cluster_with(10, 0);
        c.queue_depth = 50.0;
        c.cumulative_arrived = 50.0;
        c.step(50.0, &model(), 1.0).unwrap();
        assert_eq!(c.cumulative_served, 100.0);
        assert_eq!(c.queue_depth, 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut c = cluster_with(2, 0);
        assert!(c.step(f64::NAN, &model(), 1.0).is_err());
        assert!(c.step(-1.0, &model(), 1.0).is_err());
        assert!(c.step(1.0, &model(), 0.0).is_err());
    }

    #[test]
    fn schedule_noop_at_current() {
        let mut c = cluster_with(4, 2);
        let before = c.clone();
        c.schedule(4);
        assert_eq!(c, before);
    }

    #[test]
    fn schedule_fits_exactly() {
        let mut c = cluster_with(4, 2);
        c.schedule(6);
        assert_eq!(c.starting_replicas(), vec![(2, 15.0)]);
        assert_eq!(c.pending_replicas, 0);
        assert_eq!(c.ready_replicas(), 4);
    }

    #[test]
    fn schedule_overflow_goes_pending() {
        let mut c = cluster_with(4, 2);
        c.schedule(10);
        assert_eq!(c.starting_count(), 2);
        assert_eq!(c.pending_replicas, 4);
        assert_eq!(c.desired_replicas(), 10);
    }

    #[test]
    fn scale_down_drops_pending_then_newest() {
        let mut c = cluster_with(4, 2);
        c.schedule(10);
        c.schedule(5);
        assert_eq!(c.pending_replicas, 0);
        assert_eq!(c.ready_replicas(), 4);
        assert_eq!(c.starting_count(), 1);
        c.schedule(2);
        assert_eq!(c.ready_replicas(), 2);
        assert_eq!(c.starting_count(), 0);
        assert_eq!(c.nodes[0].used, 2);
    }

    #[test]
    fn node_activates_after_delay() {
        let mut c = ClusterState::new(params(), 1, 1);
        c.time = 100.0;
        c.provision_node(8).unwrap();
        assert_eq!(c.nodes[1].provisioned_at, 160.0);
        for _ in 0..59 {
            c.step(0.0, &model(), 1.0).unwrap();
        }
        assert_eq!(c.active_nodes(), 1);
        c.step(0.0, &model(), 1.0).unwrap();
        assert_eq!(c.active_nodes(), 2);
        assert_eq!(c.nodes[1].active_since, Some(160.0));
    }

    #[test]
    fn pending_placed_on_new_node() {
        let p = ClusterParams {
            node_capacity: 4,
            ..params()
        };
        let mut c = ClusterState::new(p, 1, 4);
        c.schedule(8);
        assert_eq!(c.pending_replicas, 4);
        c.provision_node(8).unwrap();
        for _ in 0..60 {
            c.step(0.0, &model(), 1.0).unwrap();
        }
        assert_eq!(c.pending_replicas, 0);
        assert_eq!(c.starting_count(), 4);
        assert_eq!(c.starting_replicas(), vec![(4, 75.0)]);
        c.check_invariants().unwrap();
    }

    #[test]
    fn provisioning_respects_max_nodes() {
        let mut c = ClusterState::new(params(), 3, 1);
        assert!(c.provision_node(8).is_some());
        assert!(c.provision_node(8).is_none());
        assert_eq!(c.live_nodes(), 4);
    }

    #[test]
    fn idle_node_released_after_timeout() {
        let mut c = ClusterState::new(params(), 2, 3);
        assert_eq!(c.nodes[1].used, 0);
        for _ in 0..299 {
            c.step(0.0, &model(), 1.0).unwrap();
        }
        assert_eq!(c.active_nodes(), 2);
        c.step(0.0, &model(), 1.0).unwrap();
        assert_eq!(c.active_nodes(), 1);
        assert_eq!(c.nodes[1].status, NodeStatus::Released);
    }

    #[test]
    fn starting_replica_becomes_ready() {
        let mut c = cluster_with(1, 3);
        c.schedule(2);
        for _ in 0..14 {
            c.step(0.0, &model(), 1.0).unwrap();
        }
        assert_eq!(c.ready_replicas(), 1);
        c.step(0.0, &model(), 1.0).unwrap();
        assert_eq!(c.ready_replicas(), 2);
    }
}
