use srdsa::channel::{ChannelParams, FadingKind};
use srdsa::engine::{run_replication_with, Policy, PolicyState, SimConfig, SocialGraphSpec};
use srdsa::learn::boltzmann_strategy;

/// Over the second half of a long run, the number of times each user picked
/// channel 0 matches the sum of the probabilities its strategy assigned to
/// channel 0 at each choice.
#[test]
fn choice_frequencies_follow_the_boltzmann_strategy() {
    let mut c = SimConfig::reference(Policy::Weak);
    c.n_users = 2;
    c.n_channels = 2;
    c.channels = vec![ChannelParams::new(0.2, 0.2).unwrap(), ChannelParams::new(0.4, 0.1).unwrap()];
    c.fading = FadingKind::Constant;
    c.positions = Some(vec![(0.0, 0.0), (30.0, 0.0)]);
    c.social = SocialGraphSpec::ErdosRenyi { p_link: 1.0 };
    c.means_set = vec![10.0, 30.0];
    c.horizon_slots = 100_000;
    // B_max <= 30 with one interferer: bound 1/60.
    c.learner.beta = 0.1;
    let half = c.horizon_slots as u64 / 2;
    let mut predicted = [0.0f64; 2];
    let mut variance = [0.0f64; 2];
    let mut observed = [0usize; 2];
    run_replication_with(&c, 0, |_, state, m| {
        // `state` holds the choices for slot m.slot + 1, drawn from the
        // strategy defined by the updated table and fresh recommendations.
        if m.slot < half {
            return;
        }
        let PolicyState::Weak { table } = &state.policy else { unreachable!() };
        for u in 0..2 {
            let p = boltzmann_strategy(table, u, state.rec.row(u), c.learner.beta).probs()[0];
            predicted[u] += p;
            variance[u] += p * (1.0 - p);
            observed[u] += (state.choices[u] == 0) as usize;
        }
    })
    .unwrap();
    for u in 0..2 {
        let z = (observed[u] as f64 - predicted[u]).abs() / variance[u].sqrt();
        assert!(z < 3.0, "user {u}: {} vs {:.1} ({z:.2} SE)", observed[u], predicted[u]);
    }
}
