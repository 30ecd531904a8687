//! Counter-based maximal independent set competition.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::schedule::xi;
use super::AsyncMessage;
use crate::engine::Intent;
use crate::sinr::Delivery;
use crate::NodeId;

/// Result of one MIS slot.
#[derive(Clone, Debug, PartialEq)]
pub enum MisStep {
    /// Still running; transmit the intent, if any.
    Continue(Option<Intent<AsyncMessage>>),
    /// The counter passed `κ`.
    Won,
    /// A neighbor announced its win; the lowest id if several did.
    Lost(NodeId),
}

/// One execution of MIS(ℓ).
///
/// A node first listens for `κ` slots, learning competitors' counters. It
/// then sets its counter with [`xi`] and increments it every slot,
/// broadcasting it with probability `p`. Hearing a counter within `κ` of its
/// own resets it with [`xi`]. The counter passing `κ` wins.
///
/// Messages reach a receiver one slot after they were sent, when the
/// sender's counter has already advanced once more; received counters are
/// stored as `c_w + 1` to compensate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mis {
    level: u8,
    kappa: u64,
    p: f64,
    listened: u64,
    competing: bool,
    counter: i64,
    /// `d_v(w) = stored + ticks`; bumping `ticks` advances every entry.
    competitors: BTreeMap<NodeId, i64>,
    ticks: i64,
}

impl Mis {
    pub fn new(level: u8, kappa: u64, p: f64) -> Self {
        assert!(level == 1 || level == 2, "MIS level must be 1 or 2");
        assert!(kappa >= 1, "kappa must be positive");
        Self { level, kappa, p, listened: 0, competing: false, counter: 0, competitors: BTreeMap::new(), ticks: 0 }
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn is_competing(&self) -> bool {
        self.competing
    }

    pub fn counter(&self) -> Option<i64> {
        self.competing.then_some(self.counter)
    }

    /// Current `d_v(w)` for each known competitor.
    pub fn competitors(&self) -> impl Iterator<Item = (NodeId, i64)> + '_ {
        self.competitors.iter().map(move |(&w, &d)| (w, d + self.ticks))
    }

    fn reset_value(&self) -> i64 {
        xi(self.competitors.values().map(|&d| d + self.ticks), self.kappa)
    }

    fn is_fail_signal(&self, message: &AsyncMessage) -> bool {
        match message {
            AsyncMessage::MC1Color { .. } | AsyncMessage::MC1Answer { .. } => self.level == 1,
            AsyncMessage::MC2 { .. } => self.level == 2,
            _ => false,
        }
    }

    /// Records counters heard this slot; returns whether one lies within `κ`
    /// of `own`.
    fn absorb_counters(&mut self, inbox: &[Delivery<AsyncMessage>], own: Option<i64>) -> bool {
        let mut close = false;
        for d in inbox {
            if let AsyncMessage::MA { level, counter } = d.message {
                if level == self.level {
                    let current = counter + 1;
                    self.competitors.insert(d.sender, current - self.ticks);
                    if own.is_some_and(|c| c.abs_diff(current) <= self.kappa) {
                        close = true;
                    }
                }
            }
        }
        close
    }

    pub fn step(&mut self, inbox: &[Delivery<AsyncMessage>]) -> MisStep {
        let winner = inbox.iter().filter(|d| self.is_fail_signal(&d.message)).map(|d| d.sender).min();
        if !self.competing {
            self.ticks += 1;
            self.absorb_counters(inbox, None);
            if let Some(w) = winner {
                return MisStep::Lost(w);
            }
            self.listened += 1;
            if self.listened == self.kappa {
                self.competing = true;
                self.counter = self.reset_value();
            }
            return MisStep::Continue(None);
        }

        self.counter += 1;
        if self.counter > self.kappa as i64 {
            return MisStep::Won;
        }
        self.ticks += 1;
        if let Some(w) = winner {
            return MisStep::Lost(w);
        }
        if self.absorb_counters(inbox, Some(self.counter)) {
            self.counter = self.reset_value();
        }
        MisStep::Continue(Some(Intent::new(self.p, AsyncMessage::MA { level: self.level, counter: self.counter })))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ma(sender: NodeId, level: u8, counter: i64) -> Delivery<AsyncMessage> {
        Delivery { receiver: 0, sender, message: AsyncMessage::MA { level, counter } }
    }

    #[test]
    fn lone_node_wins_after_listen_and_count() {
        for kappa in [1u64, 2, 5, 17] {
            let mut mis = Mis::new(1, kappa, 0.1);
            let mut slots = 0;
            loop {
                slots += 1;
                match mis.step(&[]) {
                    MisStep::Won => break,
                    MisStep::Continue(intent) => assert_eq!(intent.is_some(), slots > kappa),
                    MisStep::Lost(_) => unreachable!(),
                }
            }
            assert_eq!(slots, 2 * kappa + 1);
        }
    }

    #[test]
    fn announced_winner_during_listen_means_loss() {
        let mut mis = Mis::new(1, 5, 0.1);
        mis.step(&[]);
        let inbox = [
            Delivery { receiver: 0, sender: 9, message: AsyncMessage::MC1Color { color: 0 } },
            Delivery { receiver: 0, sender: 4, message: AsyncMessage::MC1Answer { target: 3, t: -7 } },
        ];
        assert_eq!(mis.step(&inbox), MisStep::Lost(4));
    }

    #[test]
    fn other_level_messages_are_ignored() {
        let mut mis = Mis::new(2, 3, 0.1);
        let inbox = [Delivery { receiver: 0, sender: 9, message: AsyncMessage::MC1Color { color: 0 } }, ma(8, 1, 0)];
        assert_eq!(mis.step(&inbox), MisStep::Continue(None));
        assert_eq!(mis.competitors().count(), 0);
    }

    #[test]
    fn listen_phase_sets_counter_outside_competitor_bands() {
        let mut mis = Mis::new(1, 2, 0.1);
        // Heard counter 1 in the first listen slot: d = 2 now, 3 after the
        // second listen slot.
        mis.step(&[ma(7, 1, 1)]);
        mis.step(&[]);
        assert_eq!(mis.competitors().collect::<Vec<_>>(), vec![(7, 3)]);
        // Band [1, 5] leaves 0 free.
        assert_eq!(mis.counter(), Some(0));
    }

    #[test]
    fn close_counter_triggers_reset() {
        let mut mis = Mis::new(1, 3, 0.1);
        for _ in 0..3 {
            mis.step(&[]);
        }
        assert_eq!(mis.counter(), Some(0));
        // Own counter becomes 1; competitor heard at 0 is now at 1.
        match mis.step(&[ma(5, 1, 0)]) {
            MisStep::Continue(Some(intent)) => {
                assert_eq!(intent.message, AsyncMessage::MA { level: 1, counter: -3 });
            }
            other => panic!("{other:?}"),
        }
    }
}
