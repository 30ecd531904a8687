use proptest::prelude::*;
use sinr_coloring::coloring_async::{tau, xi, AsyncColoring};
use sinr_coloring::coloring_sync::SyncColoring;
use sinr_coloring::engine::{run, RunOptions, WakeSchedule};
use sinr_coloring::harness::{random_greedy_coloring, validate_coloring, verify_mis};
use sinr_coloring::params::{derive_constants, ProtocolConstants};
use sinr_coloring::rng;
use sinr_coloring::sinr::{PhysicalParams, Point, Topology};

/// First `c = 0, -1, -2, ...` not covered by any band.
fn xi_scan(counters: &[i64], kappa: u64) -> i64 {
    let k = kappa as i64;
    let mut c = 0;
    while counters.iter().any(|&d| (d - k..=d + k).contains(&c)) {
        c -= 1;
    }
    c
}

/// First wait `m >= κ2` that lands on the start of `tmp`'s interval.
fn tau_scan(tmp: usize, c_prime: i64, palette: usize, kappa2: u64, k: u64) -> i64 {
    let interval = (2 * k * k * kappa2) as i64;
    let period = palette as i64 * interval;
    let mut m = kappa2 as i64;
    while (c_prime + m - tmp as i64 * interval) % period != 0 {
        m += 1;
    }
    -m
}

fn topo(points: Vec<(f64, f64)>) -> Topology {
    Topology::build(points.into_iter().map(|(x, y)| Point::new(x, y)).collect(), &PhysicalParams::default()).unwrap()
}

/// Short, reliable constants for small instances.
fn quick(n: usize) -> ProtocolConstants {
    let mut k = derive_constants(n.max(2), n, 1.0, 1.0).unwrap();
    k.p1 = 0.15;
    k.p2 = 0.15;
    k.kappa0 = 300;
    k.kappa1 = 300;
    k.kappa2 = 300;
    k.phases = 8;
    k.with_k(2).unwrap()
}

proptest! {
    #[test]
    fn xi_matches_scan(counters in prop::collection::vec(-60i64..20, 0..8), kappa in 0u64..12) {
        prop_assert_eq!(xi(counters.iter().copied(), kappa), xi_scan(&counters, kappa));
    }

    #[test]
    fn tau_matches_scan(tmp in 0usize..6, extra in 0usize..4, c_prime in -500i64..5000, kappa2 in 1u64..6, k in 1u64..4) {
        let palette = tmp + 1 + extra;
        let t = tau(tmp, c_prime, palette, kappa2, k);
        prop_assert_eq!(t, tau_scan(tmp, c_prime, palette, kappa2, k));
        prop_assert!(-t >= kappa2 as i64);
        prop_assert!(-t < (palette as u64 * 2 * k * k * kappa2 + kappa2) as i64);
    }

    #[test]
    fn kappa_ratio_follows_probabilities(n in 3usize..2000, delta_a in 1usize..400, lambda in 0.4f64..3.0) {
        let k = derive_constants(n, delta_a, 1.0, lambda).unwrap();
        if k.kappa1 > k.kappa0 {
            let ratio = k.kappa2 as f64 / k.kappa1 as f64;
            let expect = k.p1 / k.p2;
            prop_assert!((ratio - expect).abs() <= expect * (1.0 / k.kappa1 as f64 + 1.0 / k.kappa2 as f64) + 1e-12);
        }
        let bigger = derive_constants(n, delta_a, 1.0, lambda * 1.5).unwrap();
        prop_assert!(bigger.kappa0 >= k.kappa0 && bigger.kappa2 >= k.kappa2);
    }

    #[test]
    fn async_coloring_on_small_graphs(
        pts in prop::collection::vec((0.0f64..2.5, 0.0f64..2.5), 1..9),
        seed in 0u64..1000,
        spread in 0u64..200,
    ) {
        let t = topo(pts);
        // Colocated nodes can never decode each other.
        prop_assume!(t.colocated().is_empty());
        let n = t.len();
        let k = quick(n);
        let delta = t.delta();
        let input = random_greedy_coloring(&t, delta, &mut rng::input_coloring_rng(seed));
        let procs = (0..n)
            .map(|v| AsyncColoring::new(v, input[v], delta + 1, delta, &k, rng::node_rng(seed, v)).unwrap())
            .collect();
        let wake = WakeSchedule::random(n, spread, &mut rng::wake_rng(seed));
        let r = run(&t, &PhysicalParams::default(), procs, &wake, &RunOptions::new(2_000_000), &mut rng::channel_rng(seed), &mut [])
            .unwrap();
        prop_assert!(!r.timed_out());
        prop_assert!(r.protocol_errors().is_empty(), "{:?}", r.protocol_errors());
        prop_assert!(validate_coloring(&t, &r.colors(), delta).valid);
        let leaders: Vec<_> = (0..n).filter(|&v| r.processes[v].is_leader()).collect();
        prop_assert!(verify_mis(&t, &leaders).passed());
        for &l in &leaders {
            prop_assert_eq!(r.colors()[l], Some(0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sync_coloring_on_small_graphs(pts in prop::collection::vec((0.0f64..2.5, 0.0f64..2.5), 1..10), seed in 0u64..1000) {
        let t = topo(pts);
        prop_assume!(t.colocated().is_empty());
        let n = t.len();
        let k = quick(n);
        let procs = (0..n).map(|v| SyncColoring::new(v, t.delta(), &k, rng::node_rng(seed, v)).unwrap()).collect();
        let r = run(&t, &PhysicalParams::default(), procs, &WakeSchedule::synchronous(n), &RunOptions::new(1_000_000),
            &mut rng::channel_rng(seed), &mut []).unwrap();
        prop_assert!(!r.timed_out());
        prop_assert_eq!(r.slots_run, SyncColoring::total_slots(&k, t.delta()));
        let report = validate_coloring(&t, &r.colors(), t.delta());
        prop_assert!(report.valid, "{:?}", report);
    }
}
