//! Synchronous coloring: a phase-based randomized 4Δ coloring followed by a
//! schedule-based reduction to Δ+1 colors.
//!
//! All nodes start in slot 0 and derive identical phase boundaries from the
//! shared constants, so no coordination messages are needed.

use rand::seq::IteratorRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{Intent, NodeProcess};
use crate::params::ProtocolConstants;
use crate::rng::SimRng;
use crate::sinr::Delivery;
use crate::{Color, Error, NodeId, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyncMessage {
    /// Current color of the randomized 4Δ coloring.
    Tentative(Color),
    /// Final color chosen during the reduction.
    Final(Color),
}

/// Membership set over the palette `{0, ..., max}`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Palette {
    present: Vec<bool>,
    len: usize,
}

impl Palette {
    fn full(max: Color) -> Self {
        Self { present: vec![true; max + 1], len: max + 1 }
    }

    fn contains(&self, c: Color) -> bool {
        self.present.get(c).copied().unwrap_or(false)
    }

    fn remove(&mut self, c: Color) {
        if let Some(slot) = self.present.get_mut(c) {
            if std::mem::replace(slot, false) {
                self.len -= 1;
            }
        }
    }

    fn reset(&mut self) {
        self.present.fill(true);
        self.len = self.present.len();
    }

    fn len(&self) -> usize {
        self.len
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Color> {
        (0..self.present.len()).filter(|&c| self.present[c]).choose(rng)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncSnapshot {
    pub phase: String,
    pub tentative: Option<Color>,
    pub final_color: Option<Color>,
    /// Size of the current available-color set.
    pub available: usize,
    pub error: Option<String>,
}

/// Randomized 4Δ coloring: `phases` phases of `κ0` slots each. At a phase
/// boundary a node that heard its own color during the previous phase
/// redraws from the colors it did not hear; then it transmits its color with
/// probability `p1` for the whole phase.
#[derive(Clone, Debug)]
pub struct Rand4Delta {
    node: NodeId,
    palette: Palette,
    color: Color,
    history: Vec<Color>,
    p1: f64,
    kappa0: u64,
    phases: u64,
    done: bool,
    rng: SimRng,
}

impl Rand4Delta {
    pub fn new(node: NodeId, delta: usize, constants: &ProtocolConstants, rng: SimRng) -> Result<Self> {
        Self::with_palette(node, delta, 4 * delta, constants, rng)
    }

    /// Uses the palette `{0, ..., palette_max}`, which must hold at least
    /// `4Δ + 1` colors.
    pub fn with_palette(
        node: NodeId,
        delta: usize,
        palette_max: Color,
        constants: &ProtocolConstants,
        mut rng: SimRng,
    ) -> Result<Self> {
        if palette_max < 4 * delta {
            return Err(Error::InvalidConstants(format!(
                "palette {{0..{palette_max}}} is smaller than the required {{0..{}}}",
                4 * delta
            )));
        }
        let palette = Palette::full(palette_max);
        let color = palette.draw(&mut rng).expect("palette is non-empty");
        Ok(Self {
            node,
            palette,
            color,
            history: Vec::new(),
            p1: constants.p1,
            kappa0: constants.kappa0,
            phases: constants.phases,
            done: false,
            rng,
        })
    }

    /// Replaces the randomly drawn initial color.
    pub fn with_initial_color(mut self, color: Color) -> Self {
        assert!(self.palette.contains(color), "initial color outside the palette");
        self.color = color;
        self
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn color(&self) -> Color {
        self.color
    }

    /// Color held in each phase started so far.
    pub fn history(&self) -> &[Color] {
        &self.history
    }

    pub fn total_slots(&self) -> u64 {
        self.phases * self.kappa0
    }

    fn absorb(&mut self, inbox: &[Delivery<SyncMessage>]) {
        for d in inbox {
            if let SyncMessage::Tentative(c) = d.message {
                self.palette.remove(c);
            }
        }
    }

    fn step(&mut self, local_time: u64, inbox: &[Delivery<SyncMessage>]) -> Option<Intent<SyncMessage>> {
        if self.done {
            return None;
        }
        self.absorb(inbox);
        if local_time.is_multiple_of(self.kappa0) {
            if !self.palette.contains(self.color) {
                // Colors still in the palette were not heard last phase.
                // Hearing all 4Δ+1 colors is impossible with at most Δ
                // neighbors, so the draw always succeeds.
                self.color = self.palette.draw(&mut self.rng).expect("at most Δ colors removed");
            }
            self.palette.reset();
            self.history.push(self.color);
        }
        if local_time + 1 >= self.total_slots() {
            self.done = true;
        }
        Some(Intent::new(self.p1, SyncMessage::Tentative(self.color)))
    }
}

impl NodeProcess for Rand4Delta {
    type Message = SyncMessage;
    type Snapshot = SyncSnapshot;

    fn on_slot(&mut self, local_time: u64, inbox: &[Delivery<SyncMessage>]) -> Option<Intent<SyncMessage>> {
        self.step(local_time, inbox)
    }

    fn is_terminated(&self) -> bool {
        self.done
    }

    fn phase_label(&self) -> &'static str {
        if self.done {
            "done"
        } else {
            "rand4delta"
        }
    }

    fn color(&self) -> Option<Color> {
        Some(self.color)
    }

    fn snapshot(&self) -> SyncSnapshot {
        SyncSnapshot {
            phase: self.phase_label().into(),
            tentative: Some(self.color),
            final_color: None,
            available: self.palette.len(),
            error: None,
        }
    }
}

/// Color reduction from a valid `d`-coloring to `{0, ..., Δ}`: phase `i`
/// (of `κ2` slots) belongs to input color `i`. Nodes of that color pick a
/// final color they have not heard and announce it with probability `p2`;
/// everyone else listens.
#[derive(Clone, Debug)]
pub struct ColorReduction {
    node: NodeId,
    input: Color,
    input_palette: usize,
    available: Palette,
    chosen: Option<Color>,
    error: Option<String>,
    p2: f64,
    kappa2: u64,
    done: bool,
    rng: SimRng,
}

impl ColorReduction {
    /// `input_color` must lie in `{0, ..., input_palette - 1}`.
    pub fn new(
        node: NodeId,
        input_color: Color,
        input_palette: usize,
        delta: usize,
        constants: &ProtocolConstants,
        rng: SimRng,
    ) -> Result<Self> {
        if input_color >= input_palette {
            return Err(Error::InvalidConstants(format!(
                "input color {input_color} outside the palette of size {input_palette}"
            )));
        }
        Ok(Self {
            node,
            input: input_color,
            input_palette,
            available: Palette::full(delta),
            chosen: None,
            error: None,
            p2: constants.p2,
            kappa2: constants.kappa2,
            done: false,
            rng,
        })
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn input_color(&self) -> Color {
        self.input
    }

    pub fn final_color(&self) -> Option<Color> {
        self.chosen
    }

    pub fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }

    pub fn total_slots(&self) -> u64 {
        self.input_palette as u64 * self.kappa2
    }

    fn step(&mut self, local_time: u64, inbox: &[Delivery<SyncMessage>]) -> Option<Intent<SyncMessage>> {
        if self.done {
            return None;
        }
        for d in inbox {
            if let SyncMessage::Final(c) = d.message {
                self.available.remove(c);
            }
        }
        let phase = local_time / self.kappa2;
        if local_time + 1 >= self.total_slots() {
            self.done = true;
        }
        if phase as usize != self.input {
            return None;
        }
        if local_time.is_multiple_of(self.kappa2) {
            self.chosen = self.available.draw(&mut self.rng);
            if self.chosen.is_none() {
                self.error = Some(format!("node {}: no final color left in phase {phase}", self.node));
            }
        }
        self.chosen.map(|c| Intent::new(self.p2, SyncMessage::Final(c)))
    }
}

impl NodeProcess for ColorReduction {
    type Message = SyncMessage;
    type Snapshot = SyncSnapshot;

    fn on_slot(&mut self, local_time: u64, inbox: &[Delivery<SyncMessage>]) -> Option<Intent<SyncMessage>> {
        self.step(local_time, inbox)
    }

    fn is_terminated(&self) -> bool {
        self.done
    }

    fn phase_label(&self) -> &'static str {
        if self.done {
            "done"
        } else {
            "reduction"
        }
    }

    fn color(&self) -> Option<Color> {
        self.chosen
    }

    fn snapshot(&self) -> SyncSnapshot {
        SyncSnapshot {
            phase: self.phase_label().into(),
            tentative: Some(self.input),
            final_color: self.chosen,
            available: self.available.len(),
            error: self.error.clone(),
        }
    }

    fn protocol_error(&self) -> Option<&str> {
        self.error.as_deref()
    }
}

/// The full synchronous algorithm: [`Rand4Delta`], then [`ColorReduction`]
/// on the resulting 4Δ coloring.
#[derive(Clone, Debug)]
pub struct SyncColoring {
    first: Rand4Delta,
    second: Option<ColorReduction>,
    delta: usize,
    constants: ProtocolConstants,
    offset: u64,
}

impl SyncColoring {
    pub fn new(node: NodeId, delta: usize, constants: &ProtocolConstants, rng: SimRng) -> Result<Self> {
        Ok(Self {
            first: Rand4Delta::new(node, delta, constants, rng)?,
            second: None,
            delta,
            constants: constants.clone(),
            offset: constants.phases * constants.kappa0,
        })
    }

    pub fn rand4delta(&self) -> &Rand4Delta {
        &self.first
    }

    pub fn reduction(&self) -> Option<&ColorReduction> {
        self.second.as_ref()
    }

    /// `phases · κ0 + (4Δ + 1) · κ2`.
    pub fn total_slots(constants: &ProtocolConstants, delta: usize) -> u64 {
        constants.phases * constants.kappa0 + (4 * delta as u64 + 1) * constants.kappa2
    }
}

impl NodeProcess for SyncColoring {
    type Message = SyncMessage;
    type Snapshot = SyncSnapshot;

    fn on_slot(&mut self, local_time: u64, inbox: &[Delivery<SyncMessage>]) -> Option<Intent<SyncMessage>> {
        if local_time < self.offset {
            return self.first.step(local_time, inbox);
        }
        if self.second.is_none() {
            // The reduction reuses the node's stream after the coloring phases.
            let rng = self.first.rng.clone();
            let reduction = ColorReduction::new(
                self.first.node,
                self.first.color,
                4 * self.delta + 1,
                self.delta,
                &self.constants,
                rng,
            )
            .expect("Rand4Delta colors lie in {0..4Δ}");
            self.second = Some(reduction);
        }
        let second = self.second.as_mut().expect("initialized above");
        second.step(local_time - self.offset, inbox)
    }

    fn is_terminated(&self) -> bool {
        self.second.as_ref().is_some_and(|s| s.done)
    }

    fn phase_label(&self) -> &'static str {
        match &self.second {
            None => "rand4delta",
            Some(s) if s.done => "done",
            Some(_) => "reduction",
        }
    }

    fn color(&self) -> Option<Color> {
        self.second.as_ref().and_then(|s| s.chosen)
    }

    fn snapshot(&self) -> SyncSnapshot {
        match &self.second {
            None => SyncSnapshot { phase: "rand4delta".into(), ..self.first.snapshot() },
            Some(s) => SyncSnapshot { phase: self.phase_label().into(), ..s.snapshot() },
        }
    }

    fn protocol_error(&self) -> Option<&str> {
        self.second.as_ref().and_then(|s| s.error.as_deref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, RunOptions, WakeSchedule};
    use crate::params::derive_constants;
    use crate::rng;
    use crate::sinr::{PhysicalParams, Point, Topology};

    /// Constants with near-certain delivery for hand-checkable runs.
    fn reliable(phases: u64) -> ProtocolConstants {
        let mut k = derive_constants(16, 4, 1.0, 1.0).unwrap();
        k.p1 = 0.5;
        k.p2 = 0.5;
        k.kappa0 = 60;
        k.kappa1 = 60;
        k.kappa2 = 60;
        k.phases = phases;
        k
    }

    fn topo(points: &[(f64, f64)]) -> Topology {
        let pos = points.iter().map(|&(x, y)| Point::new(x, y)).collect();
        Topology::build(pos, &PhysicalParams::default()).unwrap()
    }

    fn drive<P: NodeProcess>(t: &Topology, procs: Vec<P>, seed: u64) -> crate::engine::RunResult<P> {
        run(t, &PhysicalParams::default(), procs, &WakeSchedule::synchronous(t.len()), &RunOptions::new(10_000_000), &mut rng::channel_rng(seed), &mut [])
            .unwrap()
    }

    #[test]
    fn isolated_node_keeps_initial_color() {
        let k = derive_constants(256, 10, 1.0, 1.0).unwrap();
        assert_eq!(k.phases, 134);
        let t = topo(&[(0.0, 0.0)]);
        let p = Rand4Delta::new(0, 3, &k, rng::node_rng(1, 0)).unwrap();
        let initial = p.color();
        let r = drive(&t, vec![p], 1);
        let p = &r.processes[0];
        assert_eq!(p.history().len(), 134);
        assert!(p.history().iter().all(|&c| c == initial));
        assert_eq!(r.slots_elapsed[0], Some(134 * k.kappa0));
    }

    #[test]
    fn rejects_small_palette() {
        let k = reliable(3);
        assert!(Rand4Delta::with_palette(0, 2, 7, &k, rng::node_rng(0, 0)).is_err());
        assert!(Rand4Delta::with_palette(0, 2, 8, &k, rng::node_rng(0, 0)).is_ok());
    }

    #[test]
    fn equal_neighbors_separate_and_then_stay_fixed() {
        let k = reliable(12);
        let t = topo(&[(0.0, 0.0), (0.5, 0.0)]);
        for seed in 0..20 {
            let procs = (0..2).map(|v| Rand4Delta::new(v, 1, &k, rng::node_rng(seed, v)).unwrap().with_initial_color(2)).collect();
            let r = drive(&t, procs, seed);
            let (a, b) = (r.processes[0].history(), r.processes[1].history());
            assert_eq!(a[0], b[0]);
            let split = (0..a.len()).find(|&i| a[i] != b[i]).expect("colors separate");
            assert!(split >= 1);
            assert!(a[split..].iter().all(|&c| c == a[split]), "seed {seed}: {a:?}");
            assert!(b[split..].iter().all(|&c| c == b[split]), "seed {seed}: {b:?}");
        }
    }

    #[test]
    fn lone_reduction_picks_any_final_color() {
        let k = reliable(1);
        let delta = 3;
        let t = topo(&[(0.0, 0.0)]);
        let mut seen = [false; 4];
        for seed in 0..64 {
            let p = ColorReduction::new(0, 0, 4 * delta + 1, delta, &k, rng::node_rng(seed, 0)).unwrap();
            let r = drive(&t, vec![p], seed);
            let c = r.processes[0].final_color().unwrap();
            assert!(c <= delta);
            seen[c] = true;
            assert_eq!(r.slots_elapsed[0], Some((4 * delta as u64 + 1) * k.kappa2));
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn reduction_on_star_is_valid() {
        // Center 0 with four leaves; input colors: center 0, leaves 1..=4 mixed.
        let delta = 4;
        let k = reliable(1);
        let t = topo(&[(0.0, 0.0), (0.8, 0.0), (-0.8, 0.0), (0.0, 0.8), (0.0, -0.8)]);
        assert_eq!(t.delta(), delta);
        let inputs = [0, 3, 1, 3, 7];
        for seed in 0..10 {
            let procs = (0..5)
                .map(|v| ColorReduction::new(v, inputs[v], 4 * delta + 1, delta, &k, rng::node_rng(seed, v)).unwrap())
                .collect();
            let r = drive(&t, procs, seed);
            let colors: Vec<_> = r.processes.iter().map(|p| p.final_color().unwrap()).collect();
            assert!(colors.iter().all(|&c| c <= delta));
            assert!((1..5).all(|leaf| colors[leaf] != colors[0]), "seed {seed}: {colors:?}");
        }
    }

    #[test]
    fn equal_inputs_may_collide() {
        // Two neighbors sharing an input color draw in the same phase and
        // cannot hear each other first; with Δ = 1 they collide half the time.
        let k = reliable(1);
        let t = topo(&[(0.0, 0.0), (0.5, 0.0)]);
        let collisions = (0..200)
            .filter(|&seed| {
                let procs = (0..2).map(|v| ColorReduction::new(v, 2, 5, 1, &k, rng::node_rng(seed, v)).unwrap()).collect();
                let r = drive(&t, procs, seed);
                r.processes[0].final_color() == r.processes[1].final_color()
            })
            .count();
        assert!((50..150).contains(&collisions), "{collisions}");
    }

    #[test]
    fn sync_coloring_on_small_graph() {
        let k = reliable(10);
        let t = topo(&[(0.0, 0.0), (0.6, 0.0), (1.2, 0.0), (0.3, 0.5), (0.9, 0.5)]);
        let delta = t.delta();
        let procs = (0..5).map(|v| SyncColoring::new(v, delta, &k, rng::node_rng(3, v)).unwrap()).collect();
        let r = drive(&t, procs, 3);
        assert_eq!(r.slots_run, SyncColoring::total_slots(&k, delta));
        let colors = r.colors();
        for (u, v) in t.edges() {
            assert_ne!(colors[u], colors[v]);
        }
        assert!(colors.iter().all(|c| c.is_some_and(|c| c <= delta)));
        assert!(r.protocol_errors().is_empty());
    }
}
