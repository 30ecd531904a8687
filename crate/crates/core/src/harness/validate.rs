//! Output validators and input colorings.

use std::collections::BTreeSet;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sinr::Topology;
use crate::{Color, NodeId};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    /// Neighbor pairs `(u, v)`, `u < v`, holding the same color.
    pub conflict_edges: Vec<(NodeId, NodeId)>,
    /// Nodes whose color exceeds the allowed maximum.
    pub out_of_palette: Vec<(NodeId, Color)>,
    pub missing: Vec<NodeId>,
    /// Number of distinct colors in use.
    pub palette_used: usize,
}

/// Checks that no two neighbors share a color and every color lies in
/// `{0, ..., palette_max}`.
pub fn validate_coloring(topology: &Topology, colors: &[Option<Color>], palette_max: Color) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut used = BTreeSet::new();
    for v in 0..topology.len() {
        match colors.get(v).copied().flatten() {
            None => report.missing.push(v),
            Some(c) => {
                used.insert(c);
                if c > palette_max {
                    report.out_of_palette.push((v, c));
                }
                for &w in topology.neighbors(v) {
                    if v < w && colors.get(w).copied().flatten() == Some(c) {
                        report.conflict_edges.push((v, w));
                    }
                }
            }
        }
    }
    report.palette_used = used.len();
    report.valid = report.conflict_edges.is_empty() && report.out_of_palette.is_empty() && report.missing.is_empty();
    report
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MisReport {
    pub independent: bool,
    pub maximal: bool,
    pub adjacent_winners: Vec<(NodeId, NodeId)>,
    /// Non-winners without a winning neighbor.
    pub uncovered: Vec<NodeId>,
}

impl MisReport {
    pub fn passed(&self) -> bool {
        self.independent && self.maximal
    }
}

pub fn verify_mis(topology: &Topology, winners: &[NodeId]) -> MisReport {
    let mut is_winner = vec![false; topology.len()];
    for &w in winners {
        is_winner[w] = true;
    }
    let adjacent_winners: Vec<_> = topology.edges().filter(|&(u, v)| is_winner[u] && is_winner[v]).collect();
    let uncovered: Vec<_> = (0..topology.len())
        .filter(|&v| !is_winner[v] && !topology.neighbors(v).iter().any(|&w| is_winner[w]))
        .collect();
    MisReport { independent: adjacent_winners.is_empty(), maximal: uncovered.is_empty(), adjacent_winners, uncovered }
}

/// Valid coloring built by visiting nodes in random order and giving each a
/// uniformly random color from `{0, ..., palette_max}` unused by its colored
/// neighbors. With `palette_max = Δ` every node takes the smallest free color
/// instead, so the result always fits.
pub fn random_greedy_coloring<R: Rng + ?Sized>(topology: &Topology, palette_max: Color, rng: &mut R) -> Vec<Color> {
    assert!(palette_max >= topology.delta(), "palette {{0..{palette_max}}} cannot fit Δ = {}", topology.delta());
    let n = topology.len();
    let mut order: Vec<NodeId> = (0..n).collect();
    order.shuffle(rng);
    let mut colors: Vec<Option<Color>> = vec![None; n];
    let mut taken = vec![false; palette_max + 1];
    for v in order {
        taken.fill(false);
        for &w in topology.neighbors(v) {
            if let Some(c) = colors[w] {
                taken[c] = true;
            }
        }
        let mut free = (0..=palette_max).filter(|&c| !taken[c]);
        let c = if palette_max == topology.delta() { free.next() } else { free.choose(rng) };
        colors[v] = Some(c.expect("a node has at most Δ colored neighbors"));
    }
    colors.into_iter().map(|c| c.expect("every node visited")).collect()
}
