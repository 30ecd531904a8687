//! Asynchronous color reduction with two levels of MIS.
//!
//! Nodes wake at arbitrary slots holding a color from a valid `d`-coloring.
//! A first-level MIS elects leaders, which take color 0 and run a periodic
//! schedule giving each input color an active interval of `2k²κ2` slots.
//! Every other node asks one neighboring leader when its interval starts,
//! waits for it, and competes in second-level MIS executions during the
//! interval. A second-level winner takes a color from `{1, ..., Δ}` that it
//! has not heard from a neighbor.
//!
//! Phase labels: `mis1`, `level2-wait` (requesting or waiting), `mis2`,
//! `colored1`, `colored2`, and `expired` for a node whose active interval
//! ran out before it won.

mod mis;
mod schedule;

use std::collections::VecDeque;

use rand::seq::IteratorRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use self::mis::{Mis, MisStep};
pub use self::schedule::{tau, xi};
use crate::engine::{Intent, NodeProcess};
use crate::params::ProtocolConstants;
use crate::rng::SimRng;
use crate::sinr::Delivery;
use crate::{Color, Error, NodeId, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AsyncMessage {
    /// MIS counter of the given level.
    MA { level: u8, counter: i64 },
    /// Leader announcing its color (always 0).
    MC1Color { color: Color },
    /// Leader telling `target` how many slots remain until its active
    /// interval (`-t`), correct at the slot it is sent.
    MC1Answer { target: NodeId, t: i64 },
    /// Second-level winner announcing its color.
    MC2 { color: Color },
    /// Request for an active interval from `leader`.
    MR { leader: NodeId, tmp_color: Color },
    /// Keep-alive of a second-level colored node.
    FinalColor { color: Color },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Serving {
    target: NodeId,
    t: i64,
    left: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Leader {
    announce_left: u64,
    c_prime: i64,
    queue: VecDeque<(NodeId, Color)>,
    serving: Option<Serving>,
    answered: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum State {
    Mis1(Mis),
    Requesting { leader: NodeId },
    Waiting { leader: NodeId, t: i64 },
    Active { leader: NodeId, t: i64, mis: Mis },
    Leader(Leader),
    Colored2 { color: Color, announce_left: u64 },
    Expired { leader: NodeId },
    NoColor,
}

/// Per-node outcome data inspected by the harness.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AsyncRecord {
    /// Local slot at which the node won MIS(1).
    pub leader_since: Option<u64>,
    pub leader: Option<NodeId>,
    /// Local slot of the first interval request.
    pub requested_at: Option<u64>,
    /// Local slot at which the interval answer arrived.
    pub answered_at: Option<u64>,
    /// `t` right after the interval answer arrived (negative: slots to wait).
    pub answer_t: Option<i64>,
    /// Local slot at which the active interval began.
    pub interval_start: Option<u64>,
    /// Slots into the active interval at which MIS(2) was won.
    pub won_after: Option<u64>,
    pub mis2_executions: u32,
    /// Requests a leader answered.
    pub answered: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsyncSnapshot {
    pub phase: String,
    pub tmp_color: Color,
    pub color: Option<Color>,
    pub counter: Option<i64>,
    pub t: Option<i64>,
    pub queue_len: usize,
    pub record: AsyncRecord,
    pub error: Option<String>,
}

/// One node of the asynchronous algorithm.
#[derive(Clone, Debug)]
pub struct AsyncColoring {
    node: NodeId,
    tmp_color: Color,
    palette: usize,
    /// `available[c]` for `c ∈ {1, ..., Δ}`; index 0 is never available.
    available: Vec<bool>,
    constants: ProtocolConstants,
    state: State,
    color: Option<Color>,
    record: AsyncRecord,
    error: Option<String>,
    rng: SimRng,
}

impl AsyncColoring {
    /// `tmp_color` is the node's color in a valid coloring with `palette`
    /// colors `{0, ..., palette - 1}`.
    pub fn new(
        node: NodeId,
        tmp_color: Color,
        palette: usize,
        delta: usize,
        constants: &ProtocolConstants,
        rng: SimRng,
    ) -> Result<Self> {
        if tmp_color >= palette {
            return Err(Error::InvalidConstants(format!("input color {tmp_color} outside the palette of size {palette}")));
        }
        let mut available = vec![true; delta + 1];
        available[0] = false;
        Ok(Self {
            node,
            tmp_color,
            palette,
            available,
            constants: constants.clone(),
            state: State::Mis1(Mis::new(1, constants.kappa1, constants.p1)),
            color: None,
            record: AsyncRecord::default(),
            error: None,
            rng,
        })
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn tmp_color(&self) -> Color {
        self.tmp_color
    }

    pub fn record(&self) -> &AsyncRecord {
        &self.record
    }

    pub fn is_leader(&self) -> bool {
        matches!(self.state, State::Leader(_))
    }

    /// Colors of `{1, ..., Δ}` not yet heard from a neighbor.
    pub fn available_colors(&self) -> Vec<Color> {
        (1..self.available.len()).filter(|&c| self.available[c]).collect()
    }

    fn interval(&self) -> i64 {
        self.constants.active_interval as i64
    }

    fn absorb_colors(&mut self, inbox: &[Delivery<AsyncMessage>]) {
        for d in inbox {
            let color = match d.message {
                AsyncMessage::MC1Color { color } | AsyncMessage::MC2 { color } | AsyncMessage::FinalColor { color } => color,
                _ => continue,
            };
            if let Some(slot) = self.available.get_mut(color) {
                *slot = false;
            }
        }
    }

    fn become_leader(&mut self, local_time: u64) {
        self.color = Some(0);
        self.record.leader_since = Some(local_time);
        self.state = State::Leader(Leader {
            announce_left: self.constants.kappa2,
            c_prime: 0,
            queue: VecDeque::new(),
            serving: None,
            answered: 0,
        });
    }

    fn become_colored2(&mut self) {
        let choice = (1..self.available.len()).filter(|&c| self.available[c]).choose(&mut self.rng);
        match choice {
            Some(color) => {
                self.color = Some(color);
                self.state = State::Colored2 { color, announce_left: self.constants.kappa2 };
            }
            None => {
                self.error = Some(format!("node {}: no color left in {{1..Δ}} after winning MIS(2)", self.node));
                self.state = State::NoColor;
            }
        }
    }

    fn leader_step(&mut self, inbox: &[Delivery<AsyncMessage>]) -> Option<Intent<AsyncMessage>> {
        let me = self.node;
        let (p1, p2, kappa2, k, palette) =
            (self.constants.p1, self.constants.p2, self.constants.kappa2, self.constants.k, self.palette);
        let State::Leader(leader) = &mut self.state else { unreachable!() };
        for d in inbox {
            if let AsyncMessage::MR { leader: to, tmp_color } = d.message {
                let pending = leader.queue.iter().any(|&(w, _)| w == d.sender)
                    || leader.serving.as_ref().is_some_and(|s| s.target == d.sender);
                if to == me && !pending {
                    leader.queue.push_back((d.sender, tmp_color));
                }
            }
        }
        if leader.announce_left > 0 {
            leader.announce_left -= 1;
            return Some(Intent::new(p2, AsyncMessage::MC1Color { color: 0 }));
        }
        leader.c_prime += 1;
        if leader.serving.is_none() {
            if let Some((target, tmp)) = leader.queue.pop_front() {
                let t = tau(tmp, leader.c_prime, palette, kappa2, k);
                leader.serving = Some(Serving { target, t, left: kappa2 });
            }
        }
        let Some(serving) = leader.serving.as_mut() else {
            return Some(Intent::new(p1, AsyncMessage::MC1Color { color: 0 }));
        };
        // One radio: the periodic announcement and the answer share the
        // slot, each keeping its own rate.
        let answer = AsyncMessage::MC1Answer { target: serving.target, t: serving.t };
        serving.t += 1;
        serving.left -= 1;
        if serving.left == 0 {
            leader.serving = None;
            leader.answered += 1;
        }
        self.record.answered = leader.answered;
        let message =
            if self.rng.random_bool(p2 / (p1 + p2)) { answer } else { AsyncMessage::MC1Color { color: 0 } };
        Some(Intent::new(p1 + p2, message))
    }

    fn step(&mut self, local_time: u64, inbox: &[Delivery<AsyncMessage>]) -> Option<Intent<AsyncMessage>> {
        self.absorb_colors(inbox);
        let interval = self.interval();
        match &mut self.state {
            State::Mis1(mis) => match mis.step(inbox) {
                MisStep::Continue(intent) => intent,
                MisStep::Won => {
                    self.become_leader(local_time);
                    self.leader_step(&[])
                }
                MisStep::Lost(w) => {
                    self.record.leader = Some(w);
                    self.record.requested_at = Some(local_time);
                    self.state = State::Requesting { leader: w };
                    Some(Intent::new(self.constants.p1, AsyncMessage::MR { leader: w, tmp_color: self.tmp_color }))
                }
            },
            State::Requesting { leader } => {
                let leader = *leader;
                let answer = inbox.iter().find_map(|d| match d.message {
                    AsyncMessage::MC1Answer { target, t } if d.sender == leader && target == self.node => Some(t),
                    _ => None,
                });
                let Some(t) = answer else {
                    return Some(Intent::new(
                        self.constants.p1,
                        AsyncMessage::MR { leader, tmp_color: self.tmp_color },
                    ));
                };
                // The answer was correct one slot ago.
                let t = t + 1;
                self.record.answer_t = Some(t);
                self.record.answered_at = Some(local_time);
                self.state = State::Waiting { leader, t };
                self.step_waiting(local_time)
            }
            State::Waiting { .. } => self.step_waiting(local_time),
            State::Active { .. } => self.step_active(local_time, inbox, interval),
            State::Leader(_) => self.leader_step(inbox),
            State::Colored2 { color, announce_left } => {
                if *announce_left > 0 {
                    *announce_left -= 1;
                    Some(Intent::new(self.constants.p2, AsyncMessage::MC2 { color: *color }))
                } else {
                    Some(Intent::new(self.constants.p1, AsyncMessage::FinalColor { color: *color }))
                }
            }
            State::Expired { .. } | State::NoColor => None,
        }
    }

    /// Idles until `t` reaches 0, then starts the active interval.
    fn step_waiting(&mut self, local_time: u64) -> Option<Intent<AsyncMessage>> {
        let State::Waiting { leader, t } = self.state else { unreachable!() };
        if t < 0 {
            self.state = State::Waiting { leader, t: t + 1 };
            return None;
        }
        self.record.interval_start = Some(local_time);
        self.record.mis2_executions = 1;
        self.state = State::Active { leader, t, mis: Mis::new(2, self.constants.kappa2, self.constants.p2) };
        self.step_active(local_time, &[], self.interval())
    }

    fn step_active(
        &mut self,
        _local_time: u64,
        inbox: &[Delivery<AsyncMessage>],
        interval: i64,
    ) -> Option<Intent<AsyncMessage>> {
        let State::Active { leader, t, mis } = &mut self.state else { unreachable!() };
        if *t >= interval {
            let leader = *leader;
            self.error = Some(format!("node {}: active interval ended without winning MIS(2)", self.node));
            self.state = State::Expired { leader };
            return None;
        }
        let elapsed = *t as u64;
        *t += 1;
        match mis.step(inbox) {
            MisStep::Continue(intent) => intent,
            MisStep::Won => {
                self.record.won_after = Some(elapsed);
                self.become_colored2();
                self.step(0, &[])
            }
            MisStep::Lost(_) => {
                *mis = Mis::new(2, self.constants.kappa2, self.constants.p2);
                self.record.mis2_executions += 1;
                None
            }
        }
    }
}

impl NodeProcess for AsyncColoring {
    type Message = AsyncMessage;
    type Snapshot = AsyncSnapshot;

    fn on_slot(&mut self, local_time: u64, inbox: &[Delivery<AsyncMessage>]) -> Option<Intent<AsyncMessage>> {
        self.step(local_time, inbox)
    }

    fn is_terminated(&self) -> bool {
        matches!(self.state, State::Leader(_) | State::Colored2 { .. } | State::Expired { .. } | State::NoColor)
    }

    fn phase_label(&self) -> &'static str {
        match self.state {
            State::Mis1(_) => "mis1",
            State::Requesting { .. } | State::Waiting { .. } => "level2-wait",
            State::Active { .. } => "mis2",
            State::Leader(_) => "colored1",
            State::Colored2 { .. } | State::NoColor => "colored2",
            State::Expired { .. } => "expired",
        }
    }

    fn color(&self) -> Option<Color> {
        self.color
    }

    fn snapshot(&self) -> AsyncSnapshot {
        let (counter, t, queue_len) = match &self.state {
            State::Mis1(mis) => (mis.counter(), None, 0),
            State::Waiting { t, .. } => (None, Some(*t), 0),
            State::Active { t, mis, .. } => (mis.counter(), Some(*t), 0),
            State::Leader(l) => (None, None, l.queue.len()),
            _ => (None, None, 0),
        };
        AsyncSnapshot {
            phase: self.phase_label().into(),
            tmp_color: self.tmp_color,
            color: self.color,
            counter,
            t,
            queue_len,
            record: self.record.clone(),
            error: self.error.clone(),
        }
    }

    fn protocol_error(&self) -> Option<&str> {
        self.error.as_deref()
    }
}

#[cfg(test)]
mod tests;
