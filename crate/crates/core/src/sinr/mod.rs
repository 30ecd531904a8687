//! Physical layer: node geometry, the communication graph, and the SINR
//! reception rule applied once per time slot.

mod io;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use self::io::{
    parse_topology_file, read_topology_file, render_topology_file, write_topology_file, TopologyFile,
};
use crate::{Error, NodeId, Result};

/// Hardware and environment constants shared by every node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Path-loss exponent, strictly greater than 2.
    pub alpha: f64,
    /// SINR decoding threshold.
    pub beta: f64,
    /// Background noise power.
    pub noise: f64,
    /// Uniform transmission power.
    pub power: f64,
    /// Margin between broadcasting and transmission range, in (0, 1).
    pub epsilon: f64,
    /// Broadcasting range; defines the communication graph.
    pub r_b: f64,
}

impl PhysicalParams {
    pub fn new(alpha: f64, beta: f64, noise: f64, power: f64, epsilon: f64, r_b: f64) -> Result<Self> {
        let params = Self { alpha, beta, noise, power, epsilon, r_b };
        params.validate()?;
        Ok(params)
    }

    /// Rejects parameter sets that violate the model's standing assumptions.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("noise", self.noise),
            ("power", self.power),
            ("epsilon", self.epsilon),
            ("r_b", self.r_b),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be finite and > 0, got {value}")));
            }
        }
        if self.alpha <= 2.0 {
            return Err(Error::InvalidParams(format!("alpha must exceed 2, got {}", self.alpha)));
        }
        if self.epsilon >= 1.0 {
            return Err(Error::InvalidParams(format!("epsilon must be < 1, got {}", self.epsilon)));
        }
        let limit = (1.0 - self.epsilon) * self.transmission_range();
        if self.r_b > limit {
            return Err(Error::InvalidParams(format!(
                "r_b = {} exceeds (1 - epsilon) * r_T = {limit}",
                self.r_b
            )));
        }
        Ok(())
    }

    pub fn transmission_range(&self) -> f64 {
        transmission_range(self)
    }

    pub fn proximity_range(&self) -> f64 {
        proximity_range(self)
    }

    /// Received power at distance `d`. Infinite at `d = 0`.
    #[inline]
    pub fn received_power(&self, d: f64) -> f64 {
        self.power / d.powf(self.alpha)
    }
}

impl Default for PhysicalParams {
    /// α = 4, β = 1.5, N = 0.1, P = 1, ε = 0.1 and r_B = 1, which leaves r_B
    /// comfortably below (1 - ε)·r_T ≈ 1.447.
    fn default() -> Self {
        Self { alpha: 4.0, beta: 1.5, noise: 0.1, power: 1.0, epsilon: 0.1, r_b: 1.0 }
    }
}

/// Noise-only reach `r_T = (P / (β N))^(1/α)`.
pub fn transmission_range(params: &PhysicalParams) -> f64 {
    (params.power / (params.beta * params.noise)).powf(1.0 / params.alpha)
}

/// Proximity range `r_A = r_B · (3³ · 2^α · β · (α-1)/(α-2))^(1/(α-2))`.
pub fn proximity_range(params: &PhysicalParams) -> f64 {
    proximity_range_for(params.r_b, params.alpha, params.beta)
        .expect("validated params always have alpha > 2")
}

/// Same as [`proximity_range`] for raw values; rejects `alpha <= 2`.
pub fn proximity_range_for(r_b: f64, alpha: f64, beta: f64) -> Result<f64> {
    if alpha.is_nan() || alpha <= 2.0 {
        return Err(Error::InvalidParams(format!("proximity range needs alpha > 2, got {alpha}")));
    }
    let base = 27.0 * 2f64.powf(alpha) * beta * (alpha - 1.0) / (alpha - 2.0);
    Ok(r_b * base.powf(1.0 / (alpha - 2.0)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn distance(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Node placement plus everything derived from it: the communication graph,
/// the maximum degree Δ and the proximity-range density Δ^A.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    positions: Vec<Point>,
    r_b: f64,
    r_a: f64,
    neighbors: Vec<Vec<NodeId>>,
    delta: usize,
    delta_a: usize,
    colocated: Vec<(NodeId, NodeId)>,
}

impl Topology {
    /// Builds the communication graph: `u` and `v` are neighbors iff
    /// `dist(u, v) <= r_b`. Node ids are the indices into `positions`.
    ///
    /// Colocated nodes are legal but reported through [`Topology::colocated`].
    pub fn build(positions: Vec<Point>, params: &PhysicalParams) -> Result<Self> {
        params.validate()?;
        if positions.is_empty() {
            return Err(Error::InvalidTopology("at least one node is required".into()));
        }
        if let Some(v) = positions.iter().position(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidTopology(format!("node {v} has non-finite coordinates")));
        }

        let n = positions.len();
        let r_b = params.r_b;
        let r_a = proximity_range(params);
        let mut neighbors = vec![Vec::new(); n];
        // Every node lies within r_A of itself.
        let mut proximity = vec![1usize; n];
        let mut colocated = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                let d = positions[u].distance(&positions[v]);
                if d <= r_b {
                    neighbors[u].push(v);
                    neighbors[v].push(u);
                }
                if d < r_a {
                    proximity[u] += 1;
                    proximity[v] += 1;
                }
                if d == 0.0 {
                    colocated.push((u, v));
                }
            }
        }
        let delta = neighbors.iter().map(Vec::len).max().unwrap_or(0);
        let delta_a = proximity.into_iter().max().unwrap_or(1);
        Ok(Self { positions, r_b, r_a, neighbors, delta, delta_a, colocated })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn position(&self, v: NodeId) -> Point {
        self.positions[v]
    }

    pub fn r_b(&self) -> f64 {
        self.r_b
    }

    pub fn r_a(&self) -> f64 {
        self.r_a
    }

    /// Sorted neighbor list `N_v` (excludes `v`).
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.neighbors[v]
    }

    pub fn are_neighbors(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors[u].binary_search(&v).is_ok()
    }

    /// Maximum degree Δ.
    pub fn delta(&self) -> usize {
        self.delta
    }

    /// Maximum number of nodes (including the center) closer than r_A to any node.
    pub fn delta_a(&self) -> usize {
        self.delta_a
    }

    /// Pairs of distinct nodes at distance zero.
    pub fn colocated(&self) -> &[(NodeId, NodeId)] {
        &self.colocated
    }

    pub fn distance(&self, u: NodeId, v: NodeId) -> f64 {
        self.positions[u].distance(&self.positions[v])
    }

    /// All nodes other than `v` within distance `radius` of `v`, ascending.
    pub fn within(&self, v: NodeId, radius: f64) -> Vec<NodeId> {
        let center = self.positions[v];
        (0..self.len())
            .filter(|&u| u != v && center.distance(&self.positions[u]) <= radius)
            .collect()
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(u, ns)| ns.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    fn check_node(&self, v: NodeId) -> Result<()> {
        if v < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownNode(v))
        }
    }
}

/// Convenience wrapper matching [`Topology::build`].
pub fn build_topology(positions: Vec<Point>, params: &PhysicalParams) -> Result<Topology> {
    Topology::build(positions, params)
}

/// Per-link SINR predicate: the transmission `sender -> receiver` is decodable
/// iff `(P / d(s,r)^α) / (Σ_{w ∈ simultaneous \ {s}} P / d(w,r)^α + N) >= β`.
///
/// A colocated interferer contributes infinite interference and always blocks
/// reception. A colocated sender is rejected as degenerate.
pub fn sinr_feasible(
    sender: NodeId,
    receiver: NodeId,
    simultaneous: &[NodeId],
    topology: &Topology,
    params: &PhysicalParams,
) -> Result<bool> {
    topology.check_node(sender)?;
    topology.check_node(receiver)?;
    if sender == receiver {
        return Err(Error::SelfLink(sender));
    }
    if simultaneous.contains(&receiver) {
        return Err(Error::ReceiverTransmitting(receiver));
    }
    for &w in simultaneous {
        topology.check_node(w)?;
    }
    link_feasible(sender, receiver, simultaneous, topology, params)
}

fn link_feasible(
    sender: NodeId,
    receiver: NodeId,
    transmitters: &[NodeId],
    topology: &Topology,
    params: &PhysicalParams,
) -> Result<bool> {
    let at = topology.position(receiver);
    let d = at.distance(&topology.position(sender));
    if d == 0.0 {
        return Err(Error::ColocatedSender { sender, receiver });
    }
    let signal = params.received_power(d);
    let interference: f64 = transmitters
        .iter()
        .filter(|&&w| w != sender)
        .map(|&w| params.received_power(at.distance(&topology.position(w))))
        .sum();
    Ok(signal / (interference + params.noise) >= params.beta)
}

/// A node's request to transmit `message` in the current slot with
/// independent probability `probability`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionIntent<M> {
    pub sender: NodeId,
    pub probability: f64,
    pub message: M,
}

impl<M> TransmissionIntent<M> {
    pub fn new(sender: NodeId, probability: f64, message: M) -> Self {
        Self { sender, probability, message }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Delivery<M> {
    pub receiver: NodeId,
    pub sender: NodeId,
    pub message: M,
}

/// Result of one slot: who actually transmitted and which links decoded.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotOutcome<M> {
    /// Senders whose coin came up "transmit", ascending.
    pub transmitted: Vec<NodeId>,
    /// Decoded links, grouped by sender in ascending order, receivers ascending.
    pub deliveries: Vec<Delivery<M>>,
}

impl<M> SlotOutcome<M> {
    pub fn delivered_to(&self, receiver: NodeId) -> impl Iterator<Item = &Delivery<M>> {
        self.deliveries.iter().filter(move |d| d.receiver == receiver)
    }
}

/// Resolves one time slot.
///
/// Each intent flips one coin from `rng`, in the order given. Every node that
/// did not transmit receives the message of each transmitter within r_B for
/// which the SINR predicate holds against all simultaneous transmitters.
/// Transmitters receive nothing (half duplex), and signals from beyond r_B are
/// discarded even when decodable. Colocated sender/receiver pairs never decode.
pub fn resolve_slot<M: Clone, R: Rng + ?Sized>(
    intents: &[TransmissionIntent<M>],
    topology: &Topology,
    params: &PhysicalParams,
    rng: &mut R,
) -> Result<SlotOutcome<M>> {
    check_intents(intents, topology.len())?;

    let mut firing: Vec<&TransmissionIntent<M>> = Vec::new();
    for intent in intents {
        if rng.random_bool(intent.probability) {
            firing.push(intent);
        }
    }
    firing.sort_unstable_by_key(|i| i.sender);
    let transmitted: Vec<NodeId> = firing.iter().map(|i| i.sender).collect();

    let mut deliveries = Vec::new();
    for intent in &firing {
        for &receiver in topology.neighbors(intent.sender) {
            if transmitted.binary_search(&receiver).is_ok() {
                continue;
            }
            match link_feasible(intent.sender, receiver, &transmitted, topology, params) {
                Ok(true) => deliveries.push(Delivery {
                    receiver,
                    sender: intent.sender,
                    message: intent.message.clone(),
                }),
                Ok(false) | Err(Error::ColocatedSender { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(SlotOutcome { transmitted, deliveries })
}

fn check_intents<M>(intents: &[TransmissionIntent<M>], n: usize) -> Result<()> {
    for intent in intents {
        if intent.sender >= n {
            return Err(Error::UnknownNode(intent.sender));
        }
        if !(0.0..=1.0).contains(&intent.probability) {
            return Err(Error::InvalidProbability(intent.probability));
        }
    }
    // Callers usually pass intents in ascending sender order; then no
    // duplicate bookkeeping is needed.
    if intents.windows(2).all(|w| w[0].sender < w[1].sender) {
        return Ok(());
    }
    let mut seen = vec![false; n];
    for intent in intents {
        if std::mem::replace(&mut seen[intent.sender], true) {
            return Err(Error::DuplicateIntent(intent.sender));
        }
    }
    Ok(())
}
