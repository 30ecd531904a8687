//! Random and regular node placements.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::sinr::{PhysicalParams, Point, Topology};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// `n` points uniform in a `side × side` square.
    UniformSquare,
    /// `⌈√n⌉` columns with spacing `side / ⌈√n⌉`, filled row by row.
    Grid,
    /// Poisson point process with mean `n` points in the square (at least one).
    Poisson,
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Placement::UniformSquare => "uniform-square",
            Placement::Grid => "grid",
            Placement::Poisson => "poisson",
        })
    }
}

impl FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-square" | "uniform" => Ok(Placement::UniformSquare),
            "grid" => Ok(Placement::Grid),
            "poisson" => Ok(Placement::Poisson),
            other => Err(Error::Config(format!("unknown placement '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementSpec {
    pub kind: Placement,
    pub n: usize,
    /// Side length of the square area.
    pub side: f64,
}

impl PlacementSpec {
    pub fn new(kind: Placement, n: usize, side: f64) -> Self {
        Self { kind, n, side }
    }
}

/// Points of `spec` in the unit square, to be scaled by `spec.side`.
fn unit_points<R: Rng + ?Sized>(kind: Placement, n: usize, rng: &mut R) -> Result<Vec<Point>> {
    let count = match kind {
        Placement::Poisson => {
            let dist = Poisson::new(n as f64).map_err(|e| Error::Config(format!("poisson mean {n}: {e}")))?;
            (dist.sample(rng) as usize).max(1)
        }
        _ => n,
    };
    Ok(match kind {
        Placement::Grid => {
            let cols = (n as f64).sqrt().ceil() as usize;
            (0..n).map(|i| Point::new((i % cols) as f64 / cols as f64, (i / cols) as f64 / cols as f64)).collect()
        }
        Placement::UniformSquare | Placement::Poisson => {
            (0..count).map(|_| Point::new(rng.random::<f64>(), rng.random::<f64>())).collect()
        }
    })
}

fn scaled(points: &[Point], side: f64) -> Vec<Point> {
    points.iter().map(|p| Point::new(p.x * side, p.y * side)).collect()
}

pub fn generate_topology<R: Rng + ?Sized>(spec: &PlacementSpec, params: &PhysicalParams, rng: &mut R) -> Result<Topology> {
    if spec.n == 0 {
        return Err(Error::Config("placement needs n >= 1".into()));
    }
    if !(spec.side > 0.0 && spec.side.is_finite()) {
        return Err(Error::Config(format!("area side must be positive, got {}", spec.side)));
    }
    let points = unit_points(spec.kind, spec.n, rng)?;
    Topology::build(scaled(&points, spec.side), params)
}

/// Draws one placement and rescales it until its maximum degree is as close
/// to `target_delta` as the drawn points allow, preferring the densest
/// scaling with `Δ <= target_delta`.
pub fn generate_with_target_degree<R: Rng + ?Sized>(
    kind: Placement,
    n: usize,
    target_delta: usize,
    params: &PhysicalParams,
    rng: &mut R,
) -> Result<Topology> {
    if n == 0 {
        return Err(Error::Config("placement needs n >= 1".into()));
    }
    let points = unit_points(kind, n, rng)?;
    let build = |side: f64| Topology::build(scaled(&points, side), params);
    // Degree only drops as the square grows.
    let mut lo = params.r_b * 1e-3;
    let mut hi = params.r_b * (points.len() as f64).sqrt() * 4.0;
    while build(hi)?.delta() > target_delta {
        hi *= 2.0;
    }
    if build(lo)?.delta() <= target_delta {
        return build(lo);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if build(mid)?.delta() <= target_delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    build(hi)
}
