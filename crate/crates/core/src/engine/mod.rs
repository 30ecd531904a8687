//! Slot-driven execution of per-node protocol state machines.
//!
//! The engine keeps one global slot counter. A node is polled in every slot
//! from its wake slot on, with its local time (slots since waking) and the
//! messages it decoded in the previous slot. The intents of all polled nodes
//! are resolved together by [`resolve_slot`].

pub mod audit;
pub mod trace;

use std::fmt::Debug;

use rand::Rng;
use serde::Serialize;

pub use self::audit::{probability_audit, region_probability_sums, AuditReport, AuditViolation};
use self::audit::OnlineAudit;
pub use self::trace::{read_trace, read_trace_file, write_trace, write_trace_file, EventKind, TraceEvent};
use crate::sinr::{resolve_slot, Delivery, PhysicalParams, Topology, TransmissionIntent};
use crate::{Color, Error, NodeId, Result};

/// Request to transmit `message` in the current slot with `probability`.
#[derive(Clone, Debug, PartialEq)]
pub struct Intent<M> {
    pub probability: f64,
    pub message: M,
}

impl<M> Intent<M> {
    pub fn new(probability: f64, message: M) -> Self {
        Self { probability, message }
    }
}

/// A node's protocol, polled once per slot while the node is awake.
pub trait NodeProcess {
    type Message: Clone + Debug + Serialize;
    type Snapshot: Clone + Debug + Serialize;

    /// `inbox` holds everything the node decoded in the previous slot.
    fn on_slot(&mut self, local_time: u64, inbox: &[Delivery<Self::Message>]) -> Option<Intent<Self::Message>>;

    /// True once the node has fixed its output. Terminated nodes are still
    /// polled so they can keep announcing.
    fn is_terminated(&self) -> bool;

    fn phase_label(&self) -> &'static str;

    fn color(&self) -> Option<Color>;

    fn snapshot(&self) -> Self::Snapshot;

    /// Set when the protocol hit a state its analysis rules out.
    fn protocol_error(&self) -> Option<&str> {
        None
    }
}

/// Slot at which each node starts executing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WakeSchedule(Vec<u64>);

impl WakeSchedule {
    pub fn synchronous(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn new(wake: Vec<u64>) -> Self {
        Self(wake)
    }

    /// Independent uniform offsets in `0..=max_offset`.
    pub fn random<R: Rng + ?Sized>(n: usize, max_offset: u64, rng: &mut R) -> Self {
        Self((0..n).map(|_| rng.random_range(0..=max_offset)).collect())
    }

    pub fn get(&self, v: NodeId) -> u64 {
        self.0[v]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_synchronous(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub max_slots: u64,
    pub record_trace: bool,
}

impl RunOptions {
    pub fn new(max_slots: u64) -> Self {
        Self { max_slots, record_trace: false }
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }
}

/// Hooks for checks that must hold in every slot but are too expensive to
/// record as a trace.
pub trait Observer<P: NodeProcess> {
    /// Called right after `node`'s phase label changed during `slot`.
    fn on_transition(&mut self, _slot: u64, _node: NodeId, _from: &'static str, _process: &P) {}

    /// Called after the slot's deliveries were routed.
    fn on_slot_end(&mut self, _slot: u64) {}
}

#[derive(Debug)]
pub struct RunResult<P: NodeProcess> {
    pub processes: Vec<P>,
    /// Global slots executed.
    pub slots_run: u64,
    /// Per node, slots from waking until it terminated.
    pub slots_elapsed: Vec<Option<u64>>,
    /// Nodes still running when `max_slots` was reached.
    pub unterminated: Vec<NodeId>,
    pub transmissions: u64,
    pub deliveries: u64,
    pub audit: AuditReport,
    pub trace: Option<Vec<TraceEvent>>,
}

impl<P: NodeProcess> RunResult<P> {
    pub fn timed_out(&self) -> bool {
        !self.unterminated.is_empty()
    }

    pub fn colors(&self) -> Vec<Option<Color>> {
        self.processes.iter().map(NodeProcess::color).collect()
    }

    pub fn snapshots(&self) -> Vec<P::Snapshot> {
        self.processes.iter().map(NodeProcess::snapshot).collect()
    }

    pub fn protocol_errors(&self) -> Vec<(NodeId, String)> {
        self.processes
            .iter()
            .enumerate()
            .filter_map(|(v, p)| p.protocol_error().map(|e| (v, e.to_string())))
            .collect()
    }
}

/// Runs `processes` (indexed by node id) for at most `options.max_slots`
/// slots, stopping early once every node has terminated. Channel coin flips
/// are drawn from `rng`.
pub fn run<P: NodeProcess, R: Rng + ?Sized>(
    topology: &Topology,
    params: &PhysicalParams,
    mut processes: Vec<P>,
    wake: &WakeSchedule,
    options: &RunOptions,
    rng: &mut R,
    observers: &mut [&mut dyn Observer<P>],
) -> Result<RunResult<P>> {
    let n = topology.len();
    if processes.len() != n {
        return Err(Error::Config(format!("{} processes for {n} nodes", processes.len())));
    }
    if wake.len() != n {
        return Err(Error::Config(format!("wake schedule covers {} of {n} nodes", wake.len())));
    }
    if options.max_slots == 0 {
        return Err(Error::Config("max_slots must be >= 1".into()));
    }

    let mut inboxes: Vec<Vec<Delivery<P::Message>>> = (0..n).map(|_| Vec::new()).collect();
    let mut labels: Vec<&'static str> = processes.iter().map(NodeProcess::phase_label).collect();
    let mut elapsed: Vec<Option<u64>> = vec![None; n];
    let mut done = 0usize;
    let mut audit = OnlineAudit::new(n);
    let mut trace: Option<Vec<TraceEvent>> = options.record_trace.then(Vec::new);
    let mut intents: Vec<TransmissionIntent<P::Message>> = Vec::new();
    let mut transmissions = 0u64;
    let mut delivered = 0u64;
    let mut slots_run = 0u64;

    for slot in 0..options.max_slots {
        intents.clear();
        for v in 0..n {
            let woke = wake.get(v);
            if woke > slot {
                continue;
            }
            let local = slot - woke;
            let process = &mut processes[v];
            if elapsed[v].is_none() && process.is_terminated() {
                elapsed[v] = Some(local);
                done += 1;
                if let Some(t) = trace.as_mut() {
                    t.push(TraceEvent { slot, node: v, kind: EventKind::Terminated { color: process.color() } });
                }
            }

            let mut inbox = std::mem::take(&mut inboxes[v]);
            let out = process.on_slot(local, &inbox);
            inbox.clear();
            inboxes[v] = inbox;

            audit.declare(v, out.as_ref().map_or(0.0, |i| i.probability));
            if let Some(intent) = out {
                if !(0.0..=1.0).contains(&intent.probability) {
                    return Err(Error::InvalidProbability(intent.probability));
                }
                if let Some(t) = trace.as_mut() {
                    t.push(TraceEvent { slot, node: v, kind: EventKind::Intent { probability: intent.probability } });
                }
                intents.push(TransmissionIntent::new(v, intent.probability, intent.message));
            }

            let label = process.phase_label();
            if label != labels[v] {
                let from = std::mem::replace(&mut labels[v], label);
                if let Some(t) = trace.as_mut() {
                    t.push(TraceEvent {
                        slot,
                        node: v,
                        kind: EventKind::State { from: from.to_string(), to: label.to_string() },
                    });
                }
                for o in observers.iter_mut() {
                    o.on_transition(slot, v, from, process);
                }
            }
            if elapsed[v].is_none() && process.is_terminated() {
                elapsed[v] = Some(local + 1);
                done += 1;
                if let Some(t) = trace.as_mut() {
                    t.push(TraceEvent { slot, node: v, kind: EventKind::Terminated { color: process.color() } });
                }
            }
        }
        audit.end_slot(slot, topology);

        if !intents.is_empty() {
            let outcome = resolve_slot(&intents, topology, params, rng)?;
            transmissions += outcome.transmitted.len() as u64;
            if let Some(t) = trace.as_mut() {
                for &s in &outcome.transmitted {
                    let i = intents.binary_search_by_key(&s, |i| i.sender).expect("transmitters issued intents");
                    let message = serde_json::to_value(&intents[i].message)?;
                    t.push(TraceEvent { slot, node: s, kind: EventKind::Transmit { message } });
                }
            }
            for d in outcome.deliveries {
                if wake.get(d.receiver) > slot {
                    continue;
                }
                delivered += 1;
                if let Some(t) = trace.as_mut() {
                    let message = serde_json::to_value(&d.message)?;
                    t.push(TraceEvent { slot, node: d.receiver, kind: EventKind::Deliver { sender: d.sender, message } });
                }
                inboxes[d.receiver].push(d);
            }
        }
        for o in observers.iter_mut() {
            o.on_slot_end(slot);
        }
        slots_run = slot + 1;
        if done == n {
            break;
        }
    }

    let unterminated = (0..n).filter(|&v| elapsed[v].is_none()).collect();
    Ok(RunResult {
        processes,
        slots_run,
        slots_elapsed: elapsed,
        unterminated,
        transmissions,
        deliveries: delivered,
        audit: audit.into_report(),
        trace,
    })
}
