//! Protocol constants derived from the network bounds, the (impractically
//! large) analytical λ, and an empirical calibration of a usable λ.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::audit::region_probability_sums;
use crate::sinr::{proximity_range, resolve_slot, PhysicalParams, Topology, TransmissionIntent};
use crate::{rng, Error, NodeId, Result};

/// Transmission probability used while all nodes of a region may be active.
pub fn p1_for(delta_a: usize) -> f64 {
    1.0 / (2.0 * delta_a as f64)
}

/// Transmission probability for the few scheduled nodes per region.
pub const P2: f64 = 1.0 / 180.0;

/// Second-level density bound used to size active intervals.
pub const DEFAULT_K: u64 = 90;

/// Success target of a single constant-probability broadcast.
pub const SUCCESS_TARGET: f64 = 11.0 / 12.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConstants {
    /// Upper bound on the network size.
    pub n: usize,
    pub delta_a: usize,
    pub c: f64,
    pub lambda: f64,
    pub p1: f64,
    pub p2: f64,
    /// Slots per randomized coloring phase, `⌈λ ln 12 / p1⌉`.
    pub kappa0: u64,
    /// `⌈c λ ln n / p1⌉`, raised to `kappa0` when smaller.
    pub kappa1: u64,
    /// `⌈c λ ln n / p2⌉`.
    pub kappa2: u64,
    pub k: u64,
    /// `2 k² κ2` slots.
    pub active_interval: u64,
    /// Number of randomized coloring phases, `⌈6 (c + 3) ln n⌉`.
    pub phases: u64,
}

impl ProtocolConstants {
    /// Replaces the density bound `k` and recomputes the active interval.
    pub fn with_k(mut self, k: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConstants("k must be >= 1".into()));
        }
        self.k = k;
        self.active_interval = 2 * k * k * self.kappa2;
        Ok(self)
    }

    /// Transmission probability of level `ℓ` (1 or 2).
    pub fn p_level(&self, level: u8) -> f64 {
        if level == 1 {
            self.p1
        } else {
            self.p2
        }
    }

    /// Slot budget of level `ℓ` (1 or 2).
    pub fn kappa_level(&self, level: u8) -> u64 {
        if level == 1 {
            self.kappa1
        } else {
            self.kappa2
        }
    }
}

fn ceil_slots(x: f64) -> u64 {
    // Guard against `ln`-products that land a hair above an integer.
    let r = x.round();
    let v = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
    v.max(1.0) as u64
}

pub fn derive_constants(n: usize, delta_a: usize, c: f64, lambda: f64) -> Result<ProtocolConstants> {
    if n < 2 {
        return Err(Error::InvalidConstants(format!("n must be >= 2, got {n}")));
    }
    if delta_a < 1 {
        return Err(Error::InvalidConstants("delta_a must be >= 1".into()));
    }
    if c.is_nan() || c < 1.0 || !c.is_finite() {
        return Err(Error::InvalidConstants(format!("c must be >= 1, got {c}")));
    }
    if lambda.is_nan() || lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidConstants(format!("lambda must be > 0, got {lambda}")));
    }
    let ln_n = (n as f64).ln();
    let p1 = p1_for(delta_a);
    let p2 = P2;
    let kappa0 = ceil_slots(lambda * 12f64.ln() / p1);
    let kappa1 = ceil_slots(c * lambda * ln_n / p1).max(kappa0);
    let kappa2 = ceil_slots(c * lambda * ln_n / p2);
    let phases = ceil_slots(6.0 * (c + 3.0) * ln_n);
    let k = DEFAULT_K;
    Ok(ProtocolConstants {
        n,
        delta_a,
        c,
        lambda,
        p1,
        p2,
        kappa0,
        kappa1,
        kappa2,
        k,
        active_interval: 2 * k * k * kappa2,
        phases,
    })
}

/// The analytical λ = (P_none · P_SINR)^-1 with P_none = (1/4)^χ and
/// P_SINR = 1/2. Stored in log₂ form because χ is in the hundreds or more.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalDerivation {
    pub r_a: f64,
    /// Packing constant `χ = 2π/(3√3) · (r_A + 2 r_B)² / r_B²`.
    pub chi: f64,
    /// `log₂ P_none = -2χ`.
    pub p_none_log2: f64,
    pub p_sinr: f64,
    /// `log₂ λ = 2χ + 1`.
    pub lambda_log2: f64,
    /// `λ` itself when it fits in an `f64`.
    pub lambda: Option<f64>,
}

pub fn theoretical_lambda(params: &PhysicalParams) -> TheoreticalDerivation {
    let r_a = proximity_range(params);
    let chi = packing_constant(r_a, params.r_b);
    let p_none_log2 = -2.0 * chi;
    let p_sinr: f64 = 0.5;
    let lambda_log2 = -(p_none_log2 + p_sinr.log2());
    let lambda = Some(lambda_log2.exp2()).filter(|l| l.is_finite());
    TheoreticalDerivation { r_a, chi, p_none_log2, p_sinr, lambda_log2, lambda }
}

pub fn packing_constant(r_a: f64, r_b: f64) -> f64 {
    2.0 * PI / (3.0 * 3f64.sqrt()) * (r_a + 2.0 * r_b).powi(2) / (r_b * r_b)
}

/// Slots granted to a broadcast with probability `p` at scaling `lambda`:
/// `⌈λ ln 12 / p⌉`.
pub fn broadcast_slots(lambda: f64, p: f64) -> u64 {
    (lambda * 12f64.ln() / p).ceil().max(0.0) as u64
}

/// The λ at which the broadcast budget is exactly `slots`.
pub fn lambda_for_slots(slots: u64, p: f64) -> f64 {
    let mut lambda = slots as f64 * p / 12f64.ln();
    while broadcast_slots(lambda, p) > slots {
        lambda = f64::from_bits(lambda.to_bits() - 1);
    }
    lambda
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Broadcasting node; defaults to the lowest-id node of maximum degree.
    pub designated: Option<NodeId>,
    /// Probability every other node transmits with; defaults to `1/(2Δ^A)`.
    pub background_p: Option<f64>,
    /// Search gives up beyond this λ.
    pub lambda_ceiling: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { designated: None, background_p: None, lambda_ceiling: 64.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub lambda_emp: f64,
    /// `⌈λ_emp ln 12 / p⌉`.
    pub slots: u64,
    pub trials: usize,
    pub successes: usize,
    pub achieved_success: f64,
    pub target: f64,
    pub designated: NodeId,
    pub p: f64,
    pub background_p: f64,
    /// Largest per-region probability sum of the configured load.
    pub max_region_sum: f64,
}

/// Finds the smallest λ for which a designated node, broadcasting with
/// probability `p` under background load, reaches all of its neighbors
/// within `⌈λ ln 12 / p⌉` slots in at least a `target` fraction of `trials`
/// independent runs.
///
/// Each trial is simulated once up to the λ ceiling and its completion slot
/// recorded, so every candidate λ is judged on the same random outcomes. The
/// search doubles the slot budget until the target is met and then bisects.
pub fn calibrate_lambda<R: Rng + ?Sized>(
    topology: &Topology,
    params: &PhysicalParams,
    p: f64,
    target: f64,
    trials: usize,
    rng: &mut R,
    options: &CalibrationOptions,
) -> Result<CalibrationReport> {
    if trials == 0 {
        return Err(Error::Calibration("trials must be >= 1".into()));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Calibration(format!("target must lie in (0, 1), got {target}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Calibration(format!("p must lie in (0, 1], got {p}")));
    }
    let designated = match options.designated {
        Some(v) if v >= topology.len() => return Err(Error::UnknownNode(v)),
        Some(v) => v,
        None => (0..topology.len())
            .max_by_key(|&v| (topology.neighbors(v).len(), std::cmp::Reverse(v)))
            .expect("topology is non-empty"),
    };
    if topology.neighbors(designated).is_empty() {
        return Err(Error::Calibration(format!("designated node {designated} has no neighbors")));
    }
    let background_p = options.background_p.unwrap_or_else(|| p1_for(topology.delta_a()));
    if !(0.0..=1.0).contains(&background_p) {
        return Err(Error::InvalidProbability(background_p));
    }
    let load = load_vector(topology.len(), designated, p, background_p);
    let max_region_sum = region_probability_sums(topology, &load).into_iter().fold(0.0, f64::max);
    if max_region_sum > 1.0 {
        return Err(Error::Calibration(format!(
            "configured load puts {max_region_sum:.4} > 1 probability mass in one broadcasting region"
        )));
    }

    let ceiling = broadcast_slots(options.lambda_ceiling, p).max(1);
    let base: u64 = rng.random();
    let completions: Vec<Option<u64>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut trial_rng = rng::stream(base, trial as u64);
            broadcast_completion_slot(topology, params, designated, &load, ceiling, &mut trial_rng)
        })
        .collect::<Result<_>>()?;

    let successes_within = |slots: u64| completions.iter().filter(|c| matches!(c, Some(t) if *t <= slots)).count();
    let meets = |slots: u64| successes_within(slots) as f64 >= target * trials as f64;

    let mut lo = 0u64;
    let mut hi = 1u64;
    while !meets(hi) {
        if hi >= ceiling {
            return Err(Error::Calibration(format!(
                "success frequency {:.4} < target {target:.4} at the lambda ceiling {}",
                successes_within(ceiling) as f64 / trials as f64,
                options.lambda_ceiling
            )));
        }
        lo = hi;
        hi = (hi * 2).min(ceiling);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if meets(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let successes = successes_within(hi);
    Ok(CalibrationReport {
        lambda_emp: lambda_for_slots(hi, p),
        slots: hi,
        trials,
        successes,
        achieved_success: successes as f64 / trials as f64,
        target,
        designated,
        p,
        background_p,
        max_region_sum,
    })
}

fn load_vector(n: usize, designated: NodeId, p: f64, background_p: f64) -> Vec<f64> {
    let mut load = vec![background_p; n];
    load[designated] = p;
    load
}

/// One broadcast trial: every node `v` transmits with probability `load[v]`
/// each slot. Returns the number of slots until every neighbor of
/// `designated` has decoded at least one of its messages, or `None` if that
/// did not happen within `max_slots`.
pub fn broadcast_completion_slot<R: Rng + ?Sized>(
    topology: &Topology,
    params: &PhysicalParams,
    designated: NodeId,
    load: &[f64],
    max_slots: u64,
    rng: &mut R,
) -> Result<Option<u64>> {
    let intents: Vec<TransmissionIntent<()>> = load
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(v, &p)| TransmissionIntent::new(v, p, ()))
        .collect();
    let targets = topology.neighbors(designated);
    let mut reached = vec![false; targets.len()];
    let mut missing = targets.len();
    if missing == 0 {
        return Ok(Some(0));
    }
    for slot in 1..=max_slots {
        let outcome = resolve_slot(&intents, topology, params, rng)?;
        for d in outcome.deliveries.iter().filter(|d| d.sender == designated) {
            let idx = targets.binary_search(&d.receiver).expect("deliveries stay within r_b");
            if !std::mem::replace(&mut reached[idx], true) {
                missing -= 1;
            }
        }
        if missing == 0 {
            return Ok(Some(slot));
        }
    }
    Ok(None)
}
