use std::collections::BTreeSet;

use proptest::prelude::*;
use sinr_coloring::rng;
use sinr_coloring::sinr::{resolve_slot, sinr_feasible, PhysicalParams, Point, Topology, TransmissionIntent};

fn points(max: usize, side: f64) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((0.0..side, 0.0..side), 2..=max)
        .prop_map(|v| v.into_iter().map(|(x, y)| Point::new(x, y)).collect())
}

/// Decodable links computed straight from the received-power formula.
fn oracle(pos: &[Point], transmitted: &[usize], p: &PhysicalParams) -> BTreeSet<(usize, usize)> {
    let power = |a: Point, b: Point| p.power / ((a.x - b.x).hypot(a.y - b.y)).powf(p.alpha);
    let mut links = BTreeSet::new();
    for &s in transmitted {
        for r in 0..pos.len() {
            if transmitted.contains(&r) {
                continue;
            }
            let d = (pos[s].x - pos[r].x).hypot(pos[s].y - pos[r].y);
            if d == 0.0 || d > p.r_b {
                continue;
            }
            let noise: f64 = transmitted.iter().filter(|&&w| w != s).map(|&w| power(pos[w], pos[r])).sum();
            if power(pos[s], pos[r]) / (noise + p.noise) >= p.beta {
                links.insert((s, r));
            }
        }
    }
    links
}

proptest! {
    #[test]
    fn deliveries_match_the_direct_formula(
        pos in points(6, 2.5),
        probs in prop::collection::vec(prop::sample::select(vec![0.0, 0.5, 1.0]), 6),
        seed in any::<u64>(),
    ) {
        let p = PhysicalParams::default();
        let topo = Topology::build(pos.clone(), &p).unwrap();
        let intents: Vec<_> = (0..pos.len()).map(|v| TransmissionIntent::new(v, probs[v], v)).collect();
        let out = resolve_slot(&intents, &topo, &p, &mut rng::channel_rng(seed)).unwrap();
        for (v, &prob) in probs.iter().enumerate().take(pos.len()) {
            let fired = out.transmitted.contains(&v);
            prop_assert!(prob != 1.0 || fired);
            prop_assert!(prob != 0.0 || !fired);
        }
        let got: BTreeSet<_> = out.deliveries.iter().map(|d| (d.sender, d.receiver)).collect();
        prop_assert_eq!(got, oracle(&pos, &out.transmitted, &p));
        for d in &out.deliveries {
            prop_assert_eq!(d.message, d.sender);
        }
    }

    #[test]
    fn extra_interferer_never_helps(pos in points(7, 3.0), extra in 0usize..7) {
        let p = PhysicalParams::default();
        let topo = Topology::build(pos.clone(), &p).unwrap();
        let n = pos.len();
        let (s, r) = (0, 1);
        prop_assume!(topo.distance(s, r) > 0.0);
        let others: Vec<usize> = (2..n).filter(|&w| w != extra).collect();
        let mut base = vec![s];
        base.extend(&others);
        let before = sinr_feasible(s, r, &base, &topo, &p).unwrap();
        if extra >= 2 && extra < n {
            base.push(extra);
            let after = sinr_feasible(s, r, &base, &topo, &p).unwrap();
            prop_assert!(before || !after);
        }
    }

    #[test]
    fn more_noise_never_helps(pos in points(5, 2.0), factor in 1.0f64..10.0) {
        let p = PhysicalParams::default();
        let noisy = PhysicalParams { noise: p.noise * factor, r_b: 0.5, ..p };
        let topo = Topology::build(pos.clone(), &p).unwrap();
        let noisy_topo = Topology::build(pos.clone(), &noisy).unwrap();
        prop_assume!(topo.distance(0, 1) > 0.0);
        let tx: Vec<usize> = (0..pos.len()).filter(|&v| v != 1).collect();
        let quiet = sinr_feasible(0, 1, &tx, &topo, &p).unwrap();
        let loud = sinr_feasible(0, 1, &tx, &noisy_topo, &noisy).unwrap();
        prop_assert!(quiet || !loud);
    }

    #[test]
    fn same_seed_same_slot(pos in points(6, 2.0), seed in any::<u64>()) {
        let p = PhysicalParams::default();
        let topo = Topology::build(pos.clone(), &p).unwrap();
        let intents: Vec<_> = (0..pos.len()).map(|v| TransmissionIntent::new(v, 0.4, ())).collect();
        let a = resolve_slot(&intents, &topo, &p, &mut rng::channel_rng(seed)).unwrap();
        let b = resolve_slot(&intents, &topo, &p, &mut rng::channel_rng(seed)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn transmitters_never_receive(pos in points(6, 1.5), seed in any::<u64>()) {
        let p = PhysicalParams::default();
        let topo = Topology::build(pos.clone(), &p).unwrap();
        let intents: Vec<_> = (0..pos.len()).map(|v| TransmissionIntent::new(v, 0.5, ())).collect();
        let out = resolve_slot(&intents, &topo, &p, &mut rng::channel_rng(seed)).unwrap();
        for d in &out.deliveries {
            prop_assert!(!out.transmitted.contains(&d.receiver));
            prop_assert!(topo.are_neighbors(d.sender, d.receiver));
        }
    }
}

#[test]
fn r_b_must_respect_the_transmission_range() {
    let p = PhysicalParams::default();
    let r_t = p.transmission_range();
    assert!(PhysicalParams::new(4.0, 1.5, 0.1, 1.0, 0.1, 0.9 * r_t * 0.999).is_ok());
    assert!(PhysicalParams::new(4.0, 1.5, 0.1, 1.0, 0.1, 0.9 * r_t * 1.001).is_err());
}
