use super::*;
use crate::engine::{run, RunOptions, RunResult, WakeSchedule};
use crate::params::derive_constants;
use crate::rng;
use crate::sinr::{PhysicalParams, Point, Topology};

/// Small, high-probability constants so runs are short and reliable.
fn fast() -> ProtocolConstants {
    let mut k = derive_constants(16, 4, 1.0, 1.0).unwrap();
    k.p1 = 0.2;
    k.p2 = 0.2;
    k.kappa0 = 40;
    k.kappa1 = 40;
    k.kappa2 = 40;
    k.with_k(2).unwrap()
}

fn topo(points: &[(f64, f64)]) -> Topology {
    let pos = points.iter().map(|&(x, y)| Point::new(x, y)).collect();
    Topology::build(pos, &PhysicalParams::default()).unwrap()
}

fn drive(t: &Topology, k: &ProtocolConstants, tmp: &[Color], palette: usize, wake: WakeSchedule, seed: u64) -> RunResult<AsyncColoring> {
    let procs = (0..t.len())
        .map(|v| AsyncColoring::new(v, tmp[v], palette, t.delta(), k, rng::node_rng(seed, v)).unwrap())
        .collect();
    run(t, &PhysicalParams::default(), procs, &wake, &RunOptions::new(1_000_000), &mut rng::channel_rng(seed), &mut []).unwrap()
}

fn from(sender: NodeId, message: AsyncMessage) -> Delivery<AsyncMessage> {
    Delivery { receiver: 0, sender, message }
}

#[test]
fn single_node_becomes_leader() {
    let k = fast();
    let t = topo(&[(0.0, 0.0)]);
    let r = drive(&t, &k, &[0], 1, WakeSchedule::synchronous(1), 1);
    assert_eq!(r.colors(), vec![Some(0)]);
    assert_eq!(r.processes[0].record().leader_since, Some(2 * k.kappa1));
    assert_eq!(r.slots_elapsed[0], Some(2 * k.kappa1 + 1));
}

#[test]
fn two_neighbors_split_into_leader_and_follower() {
    let k = fast();
    let t = topo(&[(0.0, 0.0), (0.5, 0.0)]);
    for seed in 0..10 {
        let r = drive(&t, &k, &[0, 1], 2, WakeSchedule::synchronous(2), seed);
        let mut colors: Vec<_> = r.colors().into_iter().map(Option::unwrap).collect();
        colors.sort();
        assert_eq!(colors, vec![0, 1], "seed {seed}");
        assert!(r.protocol_errors().is_empty());
        assert_eq!(r.processes.iter().filter(|p| p.is_leader()).count(), 1);
    }
}

#[test]
fn leader_without_requests_only_announces() {
    let k = fast();
    let mut p = AsyncColoring::new(0, 0, 1, 3, &k, rng::node_rng(0, 0)).unwrap();
    let mut local = 0;
    while !p.is_leader() {
        p.on_slot(local, &[]);
        local += 1;
    }
    for i in 0..3 * k.kappa2 {
        let intent = p.on_slot(local + i, &[]).unwrap();
        assert_eq!(intent.message, AsyncMessage::MC1Color { color: 0 });
        let expected = if i + 1 < k.kappa2 { k.p2 } else { k.p1 };
        assert_eq!(intent.probability, expected, "slot {i}");
    }
    assert_eq!(p.snapshot().queue_len, 0);
}

#[test]
fn heard_colors_leave_the_palette() {
    let k = fast();
    let mut p = AsyncColoring::new(0, 0, 4, 3, &k, rng::node_rng(0, 0)).unwrap();
    p.on_slot(0, &[from(5, AsyncMessage::MC2 { color: 1 }), from(6, AsyncMessage::FinalColor { color: 2 })]);
    assert_eq!(p.available_colors(), vec![3]);
}

#[test]
fn received_countdown_is_waited_out_exactly() {
    let k = fast();
    let mut p = AsyncColoring::new(0, 1, 2, 2, &k, rng::node_rng(0, 0)).unwrap();
    p.on_slot(0, &[from(3, AsyncMessage::MC1Color { color: 0 })]);
    assert_eq!(p.phase_label(), "level2-wait");
    assert_eq!(p.record().leader, Some(3));
    // Sent as -25, the countdown is -24 by the time it arrives.
    let mut local = 1;
    let intent = p.on_slot(local, &[from(3, AsyncMessage::MC1Answer { target: 0, t: -25 })]);
    assert!(intent.is_none());
    assert_eq!(p.record().answer_t, Some(-24));
    let mut idle = 1;
    loop {
        local += 1;
        p.on_slot(local, &[]);
        if p.phase_label() == "mis2" {
            break;
        }
        idle += 1;
    }
    assert_eq!(idle, 24);
    assert_eq!(p.record().interval_start, Some(local));
}

#[test]
fn answers_for_other_nodes_are_ignored() {
    let k = fast();
    let mut p = AsyncColoring::new(0, 1, 2, 2, &k, rng::node_rng(0, 0)).unwrap();
    p.on_slot(0, &[from(3, AsyncMessage::MC1Color { color: 0 })]);
    let intent = p.on_slot(1, &[from(3, AsyncMessage::MC1Answer { target: 9, t: -25 })]).unwrap();
    assert_eq!(intent.message, AsyncMessage::MR { leader: 3, tmp_color: 1 });
    let intent = p.on_slot(2, &[from(4, AsyncMessage::MC1Answer { target: 0, t: -25 })]).unwrap();
    assert!(matches!(intent.message, AsyncMessage::MR { .. }));
}

#[test]
fn leader_answers_queued_requests_in_time() {
    // Star: the center wakes first and leads; Δ leaves wake later and queue up.
    let k = fast();
    let delta = 4;
    let t = topo(&[(0.0, 0.0), (0.8, 0.0), (-0.8, 0.0), (0.0, 0.8), (0.0, -0.8)]);
    assert_eq!(t.delta(), delta);
    let late = 2 * k.kappa1 + 1 + k.kappa2;
    let wake = WakeSchedule::new(vec![0, late, late, late, late]);
    for seed in 0..5 {
        let r = drive(&t, &k, &[0, 1, 2, 1, 2], 3, wake.clone(), seed);
        assert!(r.processes[0].is_leader());
        for leaf in 1..=delta {
            let rec = r.processes[leaf].record();
            assert_eq!(rec.leader, Some(0));
            let waited = rec.answered_at.unwrap() - rec.requested_at.unwrap();
            assert!(waited <= k.kappa1 + delta as u64 * k.kappa2, "seed {seed} leaf {leaf}: {waited}");
            let wait = -rec.answer_t.unwrap();
            assert!(wait <= (3 * k.active_interval + k.kappa2) as i64);
        }
        let colors = r.colors();
        for (u, v) in t.edges() {
            assert_ne!(colors[u], colors[v], "seed {seed}");
        }
    }
}

#[test]
fn tiny_interval_expires_with_diagnostic() {
    // With k = 1 the interval (2κ2 slots) is shorter than a lone MIS(2)
    // execution (2κ2 + 1 slots).
    let k = fast().with_k(1).unwrap();
    let t = topo(&[(0.0, 0.0), (0.5, 0.0)]);
    let r = drive(&t, &k, &[0, 1], 2, WakeSchedule::synchronous(2), 3);
    let errors = r.protocol_errors();
    assert_eq!(errors.len(), 1);
    let (v, _) = &errors[0];
    assert_eq!(r.processes[*v].phase_label(), "expired");
    assert_eq!(r.processes[*v].color(), None);
    assert!(!r.timed_out());
}
