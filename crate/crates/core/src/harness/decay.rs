//! Per-phase conflict counts of the randomized 4Δ coloring and their decay.

use serde::{Deserialize, Serialize};

use crate::sinr::Topology;
use crate::Color;

/// Number of nodes with a same-colored neighbor in each phase, from the
/// omniscient view: `histories[v][t]` is the color of `v` in phase `t`.
/// Phases missing from a history (a node that started late) are skipped for
/// that node.
pub fn conflict_counts(topology: &Topology, histories: &[&[Color]]) -> Vec<usize> {
    let phases = histories.iter().map(|h| h.len()).max().unwrap_or(0);
    (0..phases)
        .map(|t| {
            (0..topology.len())
                .filter(|&v| {
                    histories[v].get(t).is_some_and(|&c| {
                        topology.neighbors(v).iter().any(|&w| histories[w].get(t) == Some(&c))
                    })
                })
                .count()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Fitted per-phase ratio `count[t+1] / count[t]`.
    pub ratio: f64,
    /// Phases used by the fit.
    pub points: usize,
    /// Fewer than two nonzero phases: nothing to fit, `ratio` is 0.
    pub degenerate: bool,
}

/// Least-squares fit of `ln count` against phase over the prefix of nonzero
/// counts. Once a phase is conflict-free no node redraws, so everything after
/// the first zero is zero as well and carries no rate information.
pub fn conflict_decay(counts: &[usize]) -> DecayFit {
    let prefix: Vec<f64> = counts.iter().take_while(|&&c| c > 0).map(|&c| (c as f64).ln()).collect();
    let m = prefix.len();
    if m < 2 {
        return DecayFit { ratio: 0.0, points: m, degenerate: true };
    }
    let mean_x = (m - 1) as f64 / 2.0;
    let mean_y = prefix.iter().sum::<f64>() / m as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in prefix.iter().enumerate() {
        let dx = i as f64 - mean_x;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    DecayFit { ratio: (sxy / sxx).exp(), points: m, degenerate: false }
}
