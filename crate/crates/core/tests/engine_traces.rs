use std::collections::HashSet;

use sinr_coloring::coloring_async::AsyncColoring;
use sinr_coloring::coloring_sync::SyncColoring;
use sinr_coloring::engine::{
    probability_audit, read_trace, run, write_trace, EventKind, RunOptions, RunResult, TraceEvent, WakeSchedule,
};
use sinr_coloring::harness::{
    generate_with_target_degree, random_greedy_coloring, trace_checks, AsyncObserver, Placement,
};
use sinr_coloring::params::derive_constants;
use sinr_coloring::rng;
use sinr_coloring::sinr::{PhysicalParams, Topology};

fn network(seed: u64) -> Topology {
    generate_with_target_degree(Placement::UniformSquare, 25, 5, &PhysicalParams::default(), &mut rng::topology_rng(seed))
        .unwrap()
}

fn async_run(t: &Topology, seed: u64, observer: &mut AsyncObserver) -> (RunResult<AsyncColoring>, WakeSchedule) {
    let k = derive_constants(t.len(), t.delta_a(), 1.0, 0.6).unwrap().with_k(2).unwrap();
    let delta = t.delta();
    let input = random_greedy_coloring(t, delta, &mut rng::input_coloring_rng(seed));
    let procs = (0..t.len())
        .map(|v| AsyncColoring::new(v, input[v], delta + 1, delta, &k, rng::node_rng(seed, v)).unwrap())
        .collect();
    let wake = WakeSchedule::random(t.len(), 3 * k.kappa2, &mut rng::wake_rng(seed));
    let r = run(
        t,
        &PhysicalParams::default(),
        procs,
        &wake,
        &RunOptions::new(50_000_000).with_trace(),
        &mut rng::channel_rng(seed),
        &mut [observer],
    )
    .unwrap();
    (r, wake)
}

fn check_conservation(t: &Topology, trace: &[TraceEvent], wake: &WakeSchedule) -> (u64, u64) {
    let mut intents = HashSet::new();
    let mut transmits = HashSet::new();
    let (mut tx, mut rx) = (0, 0);
    for e in trace {
        assert!(e.slot >= wake.get(e.node), "node {} active before waking: {e:?}", e.node);
        match &e.kind {
            EventKind::Intent { probability } => {
                assert!((0.0..=1.0).contains(probability));
                assert!(intents.insert((e.slot, e.node)), "two intents: {e:?}");
            }
            EventKind::Transmit { .. } => {
                assert!(intents.contains(&(e.slot, e.node)), "transmit without intent: {e:?}");
                transmits.insert((e.slot, e.node));
                tx += 1;
            }
            EventKind::Deliver { sender, .. } => {
                assert!(transmits.contains(&(e.slot, *sender)), "delivery without transmission: {e:?}");
                assert!(!transmits.contains(&(e.slot, e.node)), "transmitter received: {e:?}");
                assert!(t.are_neighbors(*sender, e.node));
                rx += 1;
            }
            _ => {}
        }
    }
    (tx, rx)
}

#[test]
fn async_trace_is_consistent() {
    for seed in 0..3 {
        let t = network(seed);
        let k = derive_constants(t.len(), t.delta_a(), 1.0, 0.6).unwrap().with_k(2).unwrap();
        let mut observer = AsyncObserver::new(&t, k.active_interval);
        let (r, wake) = async_run(&t, seed, &mut observer);
        assert!(!r.timed_out());
        let trace = r.trace.as_ref().unwrap();
        let (tx, rx) = check_conservation(&t, trace, &wake);
        assert_eq!(tx, r.transmissions);
        assert_eq!(rx, r.deliveries);

        let offline = probability_audit(trace, &t).unwrap();
        assert_eq!(offline, r.audit);
        let replay = trace_checks(&t, trace, Some(k.active_interval)).unwrap();
        assert!(replay.passed());
        assert_eq!(replay.leader_packing_max, observer.packing.max);
        assert_eq!(replay.active_density_max, Some(observer.density.max));
    }
}

#[test]
fn sync_trace_roundtrips_through_json_lines() {
    let t = network(7);
    let mut k = derive_constants(t.len(), t.delta_a(), 1.0, 0.5).unwrap();
    k.phases = 3;
    let procs = (0..t.len()).map(|v| SyncColoring::new(v, t.delta(), &k, rng::node_rng(7, v)).unwrap()).collect();
    let wake = WakeSchedule::synchronous(t.len());
    let r = run(&t, &PhysicalParams::default(), procs, &wake, &RunOptions::new(10_000_000).with_trace(), &mut rng::channel_rng(7), &mut [])
        .unwrap();
    let trace = r.trace.unwrap();
    check_conservation(&t, &trace, &wake);
    let mut buf = Vec::new();
    write_trace(&trace, &mut buf).unwrap();
    let back = read_trace(buf.as_slice()).unwrap();
    assert_eq!(back, trace);
    // Every node reports termination exactly once.
    let done: Vec<_> = trace.iter().filter(|e| matches!(e.kind, EventKind::Terminated { .. })).map(|e| e.node).collect();
    assert_eq!(done.len(), t.len());
    assert_eq!(done.iter().collect::<HashSet<_>>().len(), t.len());
}

#[test]
fn late_waker_is_silent_until_woken() {
    // A node that wakes late still terminates and never shows activity
    // before its wake slot.
    let t = network(11);
    let k = derive_constants(t.len(), t.delta_a(), 1.0, 0.6).unwrap().with_k(2).unwrap();
    let mut wake: Vec<u64> = vec![0; t.len()];
    wake[0] = 5 * k.kappa2;
    let wake = WakeSchedule::new(wake);
    let delta = t.delta();
    let input = random_greedy_coloring(&t, delta, &mut rng::input_coloring_rng(11));
    let procs = (0..t.len())
        .map(|v| AsyncColoring::new(v, input[v], delta + 1, delta, &k, rng::node_rng(11, v)).unwrap())
        .collect();
    let r = run(&t, &PhysicalParams::default(), procs, &wake, &RunOptions::new(50_000_000).with_trace(), &mut rng::channel_rng(11), &mut [])
        .unwrap();
    assert!(!r.timed_out());
    check_conservation(&t, r.trace.as_ref().unwrap(), &wake);
    assert!(r.slots_elapsed[0].is_some());
    let first = r.trace.unwrap().iter().find(|e| e.node == 0).map(|e| e.slot);
    assert!(first.is_some_and(|s| s >= 5 * k.kappa2));
}
