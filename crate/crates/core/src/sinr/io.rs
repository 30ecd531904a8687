//! Plain-text topology files.
//!
//! ```text
//! # optional comments
//! r_b 1.0
//! 0 0.25 3.5
//! 1 1.10 2.75
//! ```
//!
//! The header line `r_b <value>` is mandatory and must precede the nodes.
//! Each node line is `id x y`; ids must be exactly `0..n` in any order.

use std::fmt::Write as _;
use std::path::Path;

use super::{Point, Topology};
use crate::{Error, Result};

/// Parsed contents of a topology file.
#[derive(Clone, Debug, PartialEq)]
pub struct TopologyFile {
    pub r_b: f64,
    pub positions: Vec<Point>,
}

pub fn parse_topology_file(text: &str) -> Result<TopologyFile> {
    let mut r_b = None;
    let mut nodes: Vec<(usize, Point)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let err = |msg: String| Error::Parse { line, msg };
        if fields[0] == "r_b" {
            if r_b.is_some() {
                return Err(err("duplicate r_b header".into()));
            }
            let [_, value] = fields[..] else {
                return Err(err("expected `r_b <value>`".into()));
            };
            let value: f64 = value.parse().map_err(|e| err(format!("bad r_b: {e}")))?;
            r_b = Some(value);
            continue;
        }
        if r_b.is_none() {
            return Err(err("node line before the r_b header".into()));
        }
        let [id, x, y] = fields[..] else {
            return Err(err(format!("expected `id x y`, got {} fields", fields.len())));
        };
        let id: usize = id.parse().map_err(|e| err(format!("bad id: {e}")))?;
        let x: f64 = x.parse().map_err(|e| err(format!("bad x: {e}")))?;
        let y: f64 = y.parse().map_err(|e| err(format!("bad y: {e}")))?;
        nodes.push((id, Point::new(x, y)));
    }
    let r_b = r_b.ok_or(Error::Parse { line: 0, msg: "missing r_b header".into() })?;

    let n = nodes.len();
    let mut positions = vec![None; n];
    for (id, p) in nodes {
        let slot = positions
            .get_mut(id)
            .ok_or_else(|| Error::InvalidTopology(format!("node id {id} out of range 0..{n}")))?;
        if slot.replace(p).is_some() {
            return Err(Error::InvalidTopology(format!("duplicate node id {id}")));
        }
    }
    let positions = positions.into_iter().map(|p| p.expect("ids are a permutation")).collect();
    Ok(TopologyFile { r_b, positions })
}

pub fn read_topology_file(path: impl AsRef<Path>) -> Result<TopologyFile> {
    parse_topology_file(&std::fs::read_to_string(path)?)
}

pub fn render_topology_file(topology: &Topology) -> String {
    let mut out = format!("r_b {}\n", topology.r_b());
    for (id, p) in topology.positions().iter().enumerate() {
        writeln!(out, "{id} {} {}", p.x, p.y).expect("writing to a String cannot fail");
    }
    out
}

pub fn write_topology_file(path: impl AsRef<Path>, topology: &Topology) -> Result<()> {
    std::fs::write(path, render_topology_file(topology))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sinr::PhysicalParams;

    #[test]
    fn parses_out_of_order_ids_and_comments() {
        let text = "# demo\nr_b 0.75\n1 1.0 2.0\n0 -0.5 0.25 # first\n";
        let file = parse_topology_file(text).unwrap();
        assert_eq!(file.r_b, 0.75);
        assert_eq!(file.positions, vec![Point::new(-0.5, 0.25), Point::new(1.0, 2.0)]);
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(parse_topology_file("0 1 2\n").is_err());
        assert!(parse_topology_file("r_b 1\n0 1\n").is_err());
        assert!(parse_topology_file("r_b 1\n0 1 2\n0 3 4\n").is_err());
        assert!(parse_topology_file("r_b 1\n0 1 2\n2 3 4\n").is_err());
        assert!(parse_topology_file("r_b x\n").is_err());
        assert!(parse_topology_file("").is_err());
    }

    #[test]
    fn render_then_parse_preserves_positions() {
        let params = PhysicalParams::default();
        let pos = vec![Point::new(0.1, 0.2), Point::new(1.0 / 3.0, 7.25)];
        let t = Topology::build(pos.clone(), &params).unwrap();
        let file = parse_topology_file(&render_topology_file(&t)).unwrap();
        assert_eq!(file.positions, pos);
        assert_eq!(file.r_b, params.r_b);
    }
}
