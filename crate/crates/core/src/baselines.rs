//! Reference policies: static channel recommendation and belief-based access.

use rand::Rng;

use crate::learn::sample_index;
use crate::recommend::RecState;

/// Channel distribution of the static-recommendation policy.
///
/// With `R` channels recommended idle and `0 < R < M`, each recommended
/// channel gets `p_rec / R` and each other channel `(1 - p_rec) / (M - R)`.
/// With no recommendation, or all channels recommended, the choice is uniform.
pub fn static_recommendation_distribution(rec_state: &[RecState], p_rec: f64) -> Vec<f64> {
    let m = rec_state.len();
    let r = rec_state.iter().filter(|&&s| s == RecState::Idle).count();
    if r == 0 || r == m {
        return vec![1.0 / m as f64; m];
    }
    let on = p_rec / r as f64;
    let off = (1.0 - p_rec) / (m - r) as f64;
    rec_state
        .iter()
        .map(|&s| if s == RecState::Idle { on } else { off })
        .collect()
}

pub fn static_recommendation_choice<R: Rng + ?Sized>(
    rec_state: &[RecState],
    p_rec: f64,
    rng: &mut R,
) -> usize {
    sample_index(
        &static_recommendation_distribution(rec_state, p_rec),
        rng.random::<f64>(),
    )
}

/// Per-user idle and access counters. Both start at one, so every belief
/// starts at 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeliefState {
    idle: Vec<u64>,
    accessed: Vec<u64>,
}

impl BeliefState {
    pub fn new(n_channels: usize) -> Self {
        Self {
            idle: vec![1; n_channels],
            accessed: vec![1; n_channels],
        }
    }

    pub fn idle_count(&self, channel: usize) -> u64 {
        self.idle[channel]
    }

    pub fn access_count(&self, channel: usize) -> u64 {
        self.accessed[channel]
    }

    pub fn belief(&self, channel: usize) -> f64 {
        self.idle[channel] as f64 / self.accessed[channel] as f64
    }

    pub fn distribution(&self) -> Vec<f64> {
        let nu: Vec<f64> = (0..self.idle.len()).map(|m| self.belief(m)).collect();
        let total: f64 = nu.iter().sum();
        if total == 0.0 {
            return vec![1.0 / nu.len() as f64; nu.len()];
        }
        nu.into_iter().map(|v| v / total).collect()
    }
}

pub fn belief_update(belief: &mut BeliefState, accessed_channel: usize, sensed_idle: bool) {
    belief.accessed[accessed_channel] += 1;
    if sensed_idle {
        belief.idle[accessed_channel] += 1;
    }
}

/// Draws a channel with probability proportional to its belief.
pub fn belief_choice<R: Rng + ?Sized>(belief: &BeliefState, rng: &mut R) -> usize {
    sample_index(&belief.distribution(), rng.random::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{step_channels, ChannelParams, ChannelStateVector};
    use crate::rng::SimRng;
    use proptest::prelude::*;
    use rand::SeedableRng;

    use RecState::{Busy, Idle, Unknown};

    #[test]
    fn no_recommendation_is_uniform() {
        for p in static_recommendation_distribution(&[Unknown, Busy, Unknown], 0.9) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn normalized_branching() {
        let d = static_recommendation_distribution(&[Idle, Unknown, Idle, Busy, Unknown], 0.8);
        assert!((d[0] - 0.4).abs() < 1e-15 && (d[2] - 0.4).abs() < 1e-15);
        for k in [1, 3, 4] {
            assert!((d[k] - 0.2 / 3.0).abs() < 1e-15);
        }
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn certain_recommendation() {
        let mut rng = SimRng::seed_from_u64(2);
        for _ in 0..100 {
            assert_eq!(static_recommendation_choice(&[Busy, Idle, Unknown], 1.0, &mut rng), 1);
        }
    }

    #[test]
    fn p_rec_equal_to_share_is_uniform() {
        let rec = [Idle, Idle, Unknown, Busy, Unknown];
        for p in static_recommendation_distribution(&rec, 2.0 / 5.0) {
            assert!((p - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn belief_update_rules() {
        let mut b = BeliefState::new(3);
        belief_update(&mut b, 0, true);
        assert_eq!((b.idle_count(0), b.access_count(0)), (2, 2));
        assert_eq!(b.belief(0), 1.0);
        belief_update(&mut b, 1, false);
        assert_eq!((b.idle_count(1), b.access_count(1)), (1, 2));
        assert_eq!(b.belief(1), 0.5);
        assert_eq!(b.belief(2), 1.0);
    }

    #[test]
    fn belief_distribution() {
        let mut b = BeliefState::new(3);
        for p in b.distribution() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        belief_update(&mut b, 1, false);
        belief_update(&mut b, 2, false);
        let d = b.distribution();
        assert!((d[0] - 0.5).abs() < 1e-15);
        assert!((d[1] - 0.25).abs() < 1e-15);
        assert!((d[2] - 0.25).abs() < 1e-15);
        let pick = |seed| belief_choice(&b, &mut SimRng::seed_from_u64(seed));
        assert_eq!(pick(17), pick(17));
    }

    #[test]
    fn belief_tracks_stationary_idle_probability() {
        let params = [ChannelParams::new(0.3, 0.1).unwrap()];
        let mut rng = SimRng::seed_from_u64(8);
        let mut s = ChannelStateVector::stationary(&params, &mut rng);
        let mut b = BeliefState::new(1);
        for _ in 0..200_000 {
            belief_update(&mut b, 0, s.states[0].is_idle());
            s = step_channels(&params, &s, &mut rng).unwrap();
        }
        assert!((b.belief(0) - 0.75).abs() < 0.01, "{}", b.belief(0));
    }

    fn rec_row() -> impl Strategy<Value = Vec<RecState>> {
        prop::collection::vec(prop_oneof![Just(Idle), Just(Busy), Just(Unknown)], 1..9)
    }

    proptest! {
        #[test]
        fn static_policy_is_a_distribution(rec in rec_row(), p_rec in 0.0f64..=1.0, seed in any::<u64>()) {
            let d = static_recommendation_distribution(&rec, p_rec);
            prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(d.iter().all(|&p| p >= 0.0));
            let c = static_recommendation_choice(&rec, p_rec, &mut SimRng::seed_from_u64(seed));
            prop_assert!(c < rec.len());
        }

        #[test]
        fn beliefs_stay_in_unit_interval(events in prop::collection::vec((0usize..4, any::<bool>()), 0..200)) {
            let mut b = BeliefState::new(4);
            for (m, idle) in events {
                belief_update(&mut b, m, idle);
            }
            for m in 0..4 {
                prop_assert!((0.0..=1.0).contains(&b.belief(m)));
                prop_assert!(b.idle_count(m) <= b.access_count(m));
            }
            prop_assert!((b.distribution().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
