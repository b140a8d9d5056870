use proptest::prelude::*;

use srdsa::channel::{ChannelParams, ChannelState, FadingKind};
use srdsa::engine::{
    build_world, run_replication, run_replication_with, run_slot, Outcome, Policy, SimConfig,
    SimState, SocialGraphSpec, Sweep, SweepAxis,
};
use srdsa::rng::RandomStreamPlan;

fn small(policy: Policy) -> SimConfig {
    let mut c = SimConfig::reference(policy);
    c.n_users = 8;
    c.n_channels = 3;
    c.channels = vec![ChannelParams::new(0.2, 0.2).unwrap(); 3];
    c.area_side = 200.0;
    c.horizon_slots = 300;
    c.replications = 2;
    c
}

/// Distinct positions on a line, `gap` metres apart.
fn line(n: usize, gap: f64) -> Vec<(f64, f64)> {
    (0..n).map(|i| (i as f64 * gap, 0.0)).collect()
}

/// Runs `slots` slots with every channel held idle.
fn forced_idle(config: &SimConfig, slots: usize) -> Vec<srdsa::engine::SlotMetrics> {
    let plan = RandomStreamPlan::new(config.seed, 0);
    let world = build_world(config, &plan).unwrap();
    let mut state = SimState::new(config, &world, &plan);
    state.hold_channels = true;
    state.channels.states.iter_mut().for_each(|s| *s = ChannelState::Idle);
    (0..slots)
        .map(|_| run_slot(config, &world, &mut state).unwrap())
        .collect()
}

fn pinned(n_users: usize, gap: f64, p: f64) -> SimConfig {
    let mut c = SimConfig::reference(Policy::Strong);
    c.n_users = n_users;
    c.n_channels = 1;
    c.channels = vec![ChannelParams::new(0.5, 0.5).unwrap()];
    c.fading = FadingKind::Constant;
    c.positions = Some(line(n_users, gap));
    c.contention_set = vec![p];
    c.means_set = vec![20.0];
    c
}

#[test]
fn lone_user_on_an_idle_channel_almost_always_succeeds() {
    let c = pinned(1, 0.0, 1.0 - 1e-9);
    let slots = forced_idle(&c, 1000);
    let wins = slots.iter().filter(|m| m.outcomes[0] == Outcome::Success).count();
    assert!(wins >= 999, "{wins}");
    let mean: f64 = slots.iter().map(|m| m.system_throughput).sum::<f64>() / 1000.0;
    assert!((mean - 20.0).abs() < 0.1, "{mean}");
}

#[test]
fn interfering_users_on_one_channel_collide() {
    let c = pinned(2, 50.0, 1.0 - 1e-9);
    let slots = forced_idle(&c, 1000);
    let collisions = slots
        .iter()
        .filter(|m| m.outcomes.iter().all(|&o| o == Outcome::Collision))
        .count();
    assert!(collisions >= 999, "{collisions}");
}

#[test]
fn distant_users_reuse_the_channel() {
    let c = pinned(2, 500.0, 1.0 - 1e-9);
    let slots = forced_idle(&c, 100);
    assert!(slots
        .iter()
        .any(|m| m.outcomes.iter().all(|&o| o == Outcome::Success)));
}

#[test]
fn one_slot_horizon_matches_the_slot() {
    let mut c = small(Policy::Weak);
    c.horizon_slots = 1;
    let mut seen = Vec::new();
    let summary = run_replication_with(&c, 0, |_, _, m| seen.push(m.clone())).unwrap();
    assert_eq!(seen.len(), 1);
    assert_eq!(summary.mean_system_throughput, seen[0].system_throughput);
    assert_eq!(summary.per_user_throughput, seen[0].throughput);
}

#[test]
fn replications_are_reproducible() {
    for policy in [Policy::Strong, Policy::Weak, Policy::StaticRec, Policy::Belief] {
        let c = small(policy);
        assert_eq!(run_replication(&c, 1).unwrap(), run_replication(&c, 1).unwrap());
    }
}

#[test]
fn strong_mode_iterations_stay_below_twice_the_users() {
    let mut c = SimConfig::reference(Policy::Strong);
    c.horizon_slots = 300;
    let s = run_replication(&c, 0).unwrap();
    assert!(s.mean_iterations.unwrap() < 40.0, "{:?}", s.mean_iterations);
}

#[test]
fn single_point_experiment_yields_one_row_per_policy() {
    let c = small(Policy::Strong);
    let rows = srdsa::engine::run_experiment(&c, &[Policy::Strong, Policy::Belief], None).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].replications.len(), 2);
}

#[test]
fn multi_axis_sweep_is_rejected() {
    let err = Sweep::from_pairs(vec![
        ("p_link".into(), vec![0.1]),
        ("delta".into(), vec![100.0]),
    ])
    .unwrap_err();
    assert!(err.to_string().contains("exactly one axis"), "{err}");
}

#[test]
fn er_sweep_graphs_are_nested() {
    let mut c = small(Policy::Strong);
    let mut edges = Vec::new();
    for p in [0.1, 0.4, 0.9] {
        c.social = SocialGraphSpec::ErdosRenyi { p_link: p };
        let w = build_world(&c, &RandomStreamPlan::new(c.seed, 3)).unwrap();
        edges.push(w.topology.social.edges());
    }
    assert!(edges[0].iter().all(|e| edges[1].contains(e)));
    assert!(edges[1].iter().all(|e| edges[2].contains(e)));
}

#[test]
fn sweep_axis_rejects_fractional_user_counts() {
    let c = small(Policy::Strong);
    assert!(SweepAxis::NUsers.apply(&c, 2.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Conservation, no interference violation and homogeneous sensing, for
    /// every policy and random scenarios.
    #[test]
    fn slot_invariants(seed in any::<u64>(), policy in 0usize..4, delta in 50.0f64..300.0, p_link in 0.0f64..1.0) {
        let policy = [Policy::Strong, Policy::Weak, Policy::StaticRec, Policy::Belief][policy];
        let mut c = small(policy);
        c.seed = seed;
        c.delta = delta;
        c.social = SocialGraphSpec::ErdosRenyi { p_link };
        c.horizon_slots = 60;
        let mut failure = None;
        run_replication_with(&c, 0, |world, _, m| {
            if failure.is_some() {
                return;
            }
            let total: f64 = m.throughput.iter().sum();
            if (total - m.system_throughput).abs() > 1e-9 {
                failure = Some(format!("slot {}: sum mismatch", m.slot));
            }
            for (k, (&x, &o)) in m.throughput.iter().zip(&m.outcomes).enumerate() {
                if x < 0.0 || (x > 0.0) != (o == Outcome::Success) {
                    failure = Some(format!("slot {}: user {k} throughput {x} with {o:?}", m.slot));
                }
                let idle = m.channel_idle[m.choices[k]];
                if (o == Outcome::BusyChannel) == idle {
                    failure = Some(format!("slot {}: user {k} outcome {o:?} on idle={idle}", m.slot));
                }
            }
            for (a, b) in world.topology.interference.edges() {
                if m.choices[a] == m.choices[b]
                    && m.outcomes[a] == Outcome::Success
                    && m.outcomes[b] == Outcome::Success
                {
                    failure = Some(format!("slot {}: interfering users {a}, {b} both succeeded", m.slot));
                }
            }
        })
        .unwrap();
        prop_assert!(failure.is_none(), "{}", failure.unwrap());
    }

    #[test]
    fn identical_seeds_give_identical_runs(seed in any::<u64>(), policy in 0usize..4) {
        let policy = [Policy::Strong, Policy::Weak, Policy::StaticRec, Policy::Belief][policy];
        let mut c = small(policy);
        c.seed = seed;
        c.horizon_slots = 50;
        let collect = || {
            let mut v = Vec::new();
            run_replication_with(&c, 0, |_, _, m| v.push(m.clone())).unwrap();
            v
        };
        prop_assert_eq!(collect(), collect());
    }
}

#[test]
fn trace_social_graph_assigns_distinct_nodes() {
    let mut c = small(Policy::Belief);
    let trace = srdsa::topology::parse_edgelist(srdsa::cli::SAMPLE_EDGELIST).unwrap();
    c.social = SocialGraphSpec::Trace {
        trace: std::sync::Arc::new(trace),
        selection: srdsa::topology::Selection::RandomN,
    };
    let w = build_world(&c, &RandomStreamPlan::new(1, 0)).unwrap();
    let mut ids = w.trace_ids.clone().unwrap();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), c.n_users);
    run_replication(&c, 0).unwrap();
}
