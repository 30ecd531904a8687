//! Per-region transmission probability audit.
//!
//! For every slot and every node `v`, the declared transmission
//! probabilities of all intents issued within `v`'s broadcasting region
//! (`v` and its neighbors) are summed. The protocols are built so that this
//! sum never exceeds 1.

use serde::{Deserialize, Serialize};

use super::trace::{EventKind, TraceEvent};
use crate::sinr::Topology;
use crate::{NodeId, Result};

/// Sums above this are reported; the slack absorbs float rounding.
pub const AUDIT_LIMIT: f64 = 1.0 + 1e-9;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditViolation {
    pub slot: u64,
    /// Center of the offending broadcasting region.
    pub node: NodeId,
    pub sum: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub max_sum: f64,
    /// Slot and region where `max_sum` was first reached.
    pub argmax: Option<(u64, NodeId)>,
    pub violations: Vec<AuditViolation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn record(&mut self, slot: u64, node: NodeId, sum: f64) {
        if sum > self.max_sum {
            self.max_sum = sum;
            self.argmax = Some((slot, node));
        }
        if sum > AUDIT_LIMIT {
            self.violations.push(AuditViolation { slot, node, sum });
        }
    }

    pub fn merge(&mut self, other: &AuditReport) {
        if other.max_sum > self.max_sum {
            self.max_sum = other.max_sum;
            self.argmax = other.argmax;
        }
        self.violations.extend(other.violations.iter().cloned());
    }
}

/// Sum of `probs` over each broadcasting region.
pub fn region_probability_sums(topology: &Topology, probs: &[f64]) -> Vec<f64> {
    (0..topology.len())
        .map(|v| probs[v] + topology.neighbors(v).iter().map(|&u| probs[u]).sum::<f64>())
        .collect()
}

/// Incremental audit used by the engine.
///
/// Declared probabilities rarely change between consecutive slots, so only
/// the regions touched by a change are re-summed. A region's sum is constant
/// while none of its members change, so checking touched regions each slot
/// yields the same maximum as a full scan. A persistent violation is listed
/// once, at the slot it starts, rather than once per slot.
pub(crate) struct OnlineAudit {
    declared: Vec<f64>,
    pending: Vec<NodeId>,
    dirty: Vec<bool>,
    report: AuditReport,
}

impl OnlineAudit {
    pub(crate) fn new(n: usize) -> Self {
        Self { declared: vec![0.0; n], pending: Vec::new(), dirty: vec![false; n], report: AuditReport::default() }
    }

    pub(crate) fn declare(&mut self, node: NodeId, probability: f64) {
        if self.declared[node] != probability {
            self.declared[node] = probability;
            if !std::mem::replace(&mut self.dirty[node], true) {
                self.pending.push(node);
            }
        }
    }

    pub(crate) fn end_slot(&mut self, slot: u64, topology: &Topology) {
        if self.pending.is_empty() {
            return;
        }
        let mut regions: Vec<NodeId> = Vec::new();
        for v in self.pending.drain(..) {
            self.dirty[v] = false;
            regions.push(v);
            regions.extend_from_slice(topology.neighbors(v));
        }
        regions.sort_unstable();
        regions.dedup();
        for u in regions {
            let sum = self.declared[u] + topology.neighbors(u).iter().map(|&w| self.declared[w]).sum::<f64>();
            self.report.record(slot, u, sum);
        }
    }

    pub(crate) fn into_report(self) -> AuditReport {
        self.report
    }
}

/// Offline audit over a recorded trace. Nodes without an `intent` event in a
/// slot count as silent.
pub fn probability_audit(trace: &[TraceEvent], topology: &Topology) -> Result<AuditReport> {
    let n = topology.len();
    let mut report = AuditReport::default();
    let mut probs = vec![0.0; n];
    let mut touched: Vec<NodeId> = Vec::new();
    let mut current: Option<u64> = None;

    let flush = |slot: u64, probs: &mut [f64], touched: &mut Vec<NodeId>, report: &mut AuditReport| {
        let mut regions: Vec<NodeId> = Vec::new();
        for &v in touched.iter() {
            regions.push(v);
            regions.extend_from_slice(topology.neighbors(v));
        }
        regions.sort_unstable();
        regions.dedup();
        for u in regions {
            let sum = probs[u] + topology.neighbors(u).iter().map(|&w| probs[w]).sum::<f64>();
            report.record(slot, u, sum);
        }
        for &v in touched.iter() {
            probs[v] = 0.0;
        }
        touched.clear();
    };

    for event in trace {
        if let EventKind::Intent { probability } = event.kind {
            if event.node >= n {
                return Err(crate::Error::UnknownNode(event.node));
            }
            if current != Some(event.slot) {
                if let Some(slot) = current {
                    flush(slot, &mut probs, &mut touched, &mut report);
                }
                current = Some(event.slot);
            }
            probs[event.node] = probability;
            touched.push(event.node);
        }
    }
    if let Some(slot) = current {
        flush(slot, &mut probs, &mut touched, &mut report);
    }
    Ok(report)
}
