//! Geometric invariants of the coloring stacks, checked per slot.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::coloring_async::AsyncColoring;
use crate::engine::{probability_audit, AuditReport, EventKind, NodeProcess, Observer, TraceEvent};
use crate::sinr::Topology;
use crate::{Color, NodeId, Result};

/// Independent nodes that fit within distance `2 r_B` of any point.
pub const MAX_LEADERS_NEAR: usize = 18;
/// Same-colored nodes of a valid coloring that fit in one broadcasting region.
pub const MAX_SAME_COLOR_PER_REGION: usize = 5;
/// `18 · 5`: concurrently active second-level nodes per broadcasting region.
pub const MAX_ACTIVE_PER_REGION: usize = MAX_LEADERS_NEAR * MAX_SAME_COLOR_PER_REGION;

/// Running count of leaders within `2 r_B` of every node. Leaders never step
/// down, so checking at each new leader covers every slot.
#[derive(Clone, Debug)]
pub struct LeaderPacking {
    counts: Vec<usize>,
    pub max: usize,
    /// Slot and center node where `max` was first reached.
    pub witness: Option<(u64, NodeId)>,
}

impl LeaderPacking {
    pub fn new(n: usize) -> Self {
        Self { counts: vec![0; n], max: 0, witness: None }
    }

    pub fn add(&mut self, topology: &Topology, leader: NodeId, slot: u64) {
        let radius = 2.0 * topology.r_b();
        for u in std::iter::once(leader).chain(topology.within(leader, radius)) {
            self.counts[u] += 1;
            if self.counts[u] > self.max {
                self.max = self.counts[u];
                self.witness = Some((slot, u));
            }
        }
    }
}

/// Largest number of `leaders` within `2 r_B` of a node, with that node.
pub fn max_leaders_within_2rb(topology: &Topology, leaders: &[NodeId]) -> (usize, Option<NodeId>) {
    let mut packing = LeaderPacking::new(topology.len());
    for &l in leaders {
        packing.add(topology, l, 0);
    }
    (packing.max, packing.witness.map(|(_, v)| v))
}

/// Per broadcasting region, the largest number of members sharing a color.
/// Returns the maximum with its region center and color.
pub fn max_same_color_per_region(topology: &Topology, colors: &[Color]) -> (usize, Option<(NodeId, Color)>) {
    let mut best = (0, None);
    for v in 0..topology.len() {
        let mut counts: BTreeMap<Color, usize> = BTreeMap::new();
        for u in std::iter::once(v).chain(topology.neighbors(v).iter().copied()) {
            *counts.entry(colors[u]).or_default() += 1;
        }
        for (c, k) in counts {
            if k > best.0 {
                best = (k, Some((v, c)));
            }
        }
    }
    best
}

/// Tracks how many nodes of each broadcasting region are inside their active
/// interval `[start, start + interval)`.
#[derive(Clone, Debug)]
pub struct ActiveDensity {
    interval: u64,
    counts: Vec<usize>,
    /// Per region, the largest count seen.
    pub region_max: Vec<usize>,
    exits: BinaryHeap<Reverse<(u64, NodeId)>>,
    pub max: usize,
    pub witness: Option<(u64, NodeId)>,
}

impl ActiveDensity {
    pub fn new(n: usize, interval: u64) -> Self {
        Self { interval, counts: vec![0; n], region_max: vec![0; n], exits: BinaryHeap::new(), max: 0, witness: None }
    }

    pub fn enter(&mut self, topology: &Topology, node: NodeId, slot: u64) {
        for u in std::iter::once(node).chain(topology.neighbors(node).iter().copied()) {
            self.counts[u] += 1;
            self.region_max[u] = self.region_max[u].max(self.counts[u]);
            if self.counts[u] > self.max {
                self.max = self.counts[u];
                self.witness = Some((slot, u));
            }
        }
        self.exits.push(Reverse((slot + self.interval, node)));
    }

    /// Retires intervals that do not cover `slot + 1`.
    pub fn end_slot(&mut self, topology: &Topology, slot: u64) {
        while let Some(&Reverse((exit, node))) = self.exits.peek() {
            if exit > slot + 1 {
                break;
            }
            self.exits.pop();
            for u in std::iter::once(node).chain(topology.neighbors(node).iter().copied()) {
                self.counts[u] -= 1;
            }
        }
    }
}

/// Per-region bound on concurrently active nodes: members following the same
/// leader are active together only if they share an input color, so each
/// leader contributes its largest same-color group in the region.
pub fn active_density_bound(topology: &Topology, leader_of: &[Option<NodeId>], tmp: &[Color]) -> Vec<usize> {
    (0..topology.len())
        .map(|v| {
            let mut groups: BTreeMap<(NodeId, Color), usize> = BTreeMap::new();
            for u in std::iter::once(v).chain(topology.neighbors(v).iter().copied()) {
                if let Some(l) = leader_of[u] {
                    *groups.entry((l, tmp[u])).or_default() += 1;
                }
            }
            let mut per_leader: BTreeMap<NodeId, usize> = BTreeMap::new();
            for ((l, _), k) in groups {
                let e = per_leader.entry(l).or_default();
                *e = (*e).max(k);
            }
            per_leader.values().sum()
        })
        .collect()
}

/// Engine observer for asynchronous runs: leader packing and active density
/// in every slot.
pub struct AsyncObserver<'a> {
    topology: &'a Topology,
    pub packing: LeaderPacking,
    pub density: ActiveDensity,
}

impl<'a> AsyncObserver<'a> {
    pub fn new(topology: &'a Topology, interval: u64) -> Self {
        Self { topology, packing: LeaderPacking::new(topology.len()), density: ActiveDensity::new(topology.len(), interval) }
    }
}

impl Observer<AsyncColoring> for AsyncObserver<'_> {
    fn on_transition(&mut self, slot: u64, node: NodeId, from: &'static str, process: &AsyncColoring) {
        match (from, process.phase_label()) {
            (_, "colored1") => self.packing.add(self.topology, node, slot),
            ("level2-wait", "mis2") => self.density.enter(self.topology, node, slot),
            _ => {}
        }
    }

    fn on_slot_end(&mut self, slot: u64) {
        self.density.end_slot(self.topology, slot);
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceCheckReport {
    pub audit: AuditReport,
    pub leader_packing_max: usize,
    pub leader_packing_witness: Option<(u64, NodeId)>,
    /// Present when an active-interval length was supplied.
    pub active_density_max: Option<usize>,
    pub active_density_witness: Option<(u64, NodeId)>,
}

impl TraceCheckReport {
    pub fn passed(&self) -> bool {
        self.audit.passed()
            && self.leader_packing_max <= MAX_LEADERS_NEAR
            && self.active_density_max.is_none_or(|m| m <= MAX_ACTIVE_PER_REGION)
    }
}

/// Replays a recorded trace: probability audit, leader packing from
/// `colored1` transitions and, given `active_interval`, active density from
/// `level2-wait -> mis2` transitions.
pub fn trace_checks(topology: &Topology, trace: &[TraceEvent], active_interval: Option<u64>) -> Result<TraceCheckReport> {
    let audit = probability_audit(trace, topology)?;
    let mut packing = LeaderPacking::new(topology.len());
    let mut density = active_interval.map(|i| ActiveDensity::new(topology.len(), i));
    let mut last_slot: Option<u64> = None;
    for e in trace {
        if e.node >= topology.len() {
            return Err(crate::Error::UnknownNode(e.node));
        }
        if let Some(d) = density.as_mut() {
            if let Some(prev) = last_slot {
                for s in prev..e.slot {
                    d.end_slot(topology, s);
                }
            }
        }
        last_slot = Some(e.slot);
        if let EventKind::State { from, to } = &e.kind {
            if to == "colored1" {
                packing.add(topology, e.node, e.slot);
            }
            if let (Some(d), "level2-wait", "mis2") = (density.as_mut(), from.as_str(), to.as_str()) {
                d.enter(topology, e.node, e.slot);
            }
        }
    }
    Ok(TraceCheckReport {
        audit,
        leader_packing_max: packing.max,
        leader_packing_witness: packing.witness,
        active_density_max: density.as_ref().map(|d| d.max),
        active_density_witness: density.and_then(|d| d.witness),
    })
}
