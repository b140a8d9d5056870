//! The five-stage slot protocol.

use crate::baselines::{belief_choice, belief_update, static_recommendation_choice, BeliefState};
use crate::channel::{step_channels, ChannelStateVector};
use crate::error::{Error, Result};
use crate::game::{solve_nash, verify_nash, GameInstance, StrategyProfile};
use crate::learn::{boltzmann_strategy, learning_step, Observation, PerceptionTable};
use crate::recommend::{fuse_recommendations, idle_probability_from_state, RecommendationState};
use crate::rng::{Purpose, RandomStreamPlan, SimRng};

use super::{realize_slot, Outcome, Policy, SimConfig, World};

/// Policy-specific memory carried between slots.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyState {
    Strong,
    Weak { table: PerceptionTable },
    StaticRec,
    Belief { beliefs: Vec<BeliefState> },
}

#[derive(Debug, Clone)]
pub struct Streams {
    pub channel: SimRng,
    pub fading: SimRng,
    pub contention: SimRng,
    pub policy: SimRng,
}

impl Streams {
    pub fn new(plan: &RandomStreamPlan) -> Self {
        Self {
            channel: plan.stream(Purpose::ChannelEvolution),
            fading: plan.stream(Purpose::Fading),
            contention: plan.stream(Purpose::Contention),
            policy: plan.stream(Purpose::Policy),
        }
    }
}

/// Mutable state of one replication between slots.
#[derive(Debug, Clone)]
pub struct SimState {
    pub slot: u64,
    pub channels: ChannelStateVector,
    /// Channel each user accesses in the current slot.
    pub choices: Vec<usize>,
    /// Recommendation states the current choices were made under.
    pub rec: RecommendationState,
    pub policy: PolicyState,
    pub streams: Streams,
    /// Keep channel states fixed instead of evolving them (test hook).
    pub hold_channels: bool,
}

impl SimState {
    /// Slot-0 state: stationary channel draw, lowest-index channels for the
    /// strong solver, independent uniform draws for the other policies.
    pub fn new(config: &SimConfig, world: &World, plan: &RandomStreamPlan) -> Self {
        let (n, m) = (world.n_users(), world.n_channels());
        let mut streams = Streams::new(plan);
        let channels = ChannelStateVector::stationary(&world.channels, &mut streams.channel);
        let rec = RecommendationState::unknown(n, m);
        let (policy, choices) = match config.policy {
            Policy::Strong => (PolicyState::Strong, vec![0; n]),
            Policy::Weak => {
                let table = PerceptionTable::new(n, m, config.learner.initial_value);
                let choices = (0..n)
                    .map(|u| {
                        boltzmann_strategy(&table, u, rec.row(u), config.learner.beta)
                            .sample(&mut streams.policy)
                    })
                    .collect();
                (PolicyState::Weak { table }, choices)
            }
            Policy::StaticRec => (
                PolicyState::StaticRec,
                (0..n)
                    .map(|u| static_recommendation_choice(rec.row(u), config.p_rec, &mut streams.policy))
                    .collect(),
            ),
            Policy::Belief => {
                let beliefs = vec![BeliefState::new(m); n];
                let choices = beliefs
                    .iter()
                    .map(|b| belief_choice(b, &mut streams.policy))
                    .collect();
                (PolicyState::Belief { beliefs }, choices)
            }
        };
        Self {
            slot: 0,
            channels,
            choices,
            rec,
            policy,
            streams,
            hold_channels: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverStats {
    /// Best-response steps until the equilibrium profile was reached.
    pub iterations: usize,
    /// All steps including the certifying quiet pass.
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotMetrics {
    pub slot: u64,
    /// Channels accessed in this slot.
    pub choices: Vec<usize>,
    pub channel_idle: Vec<bool>,
    pub throughput: Vec<f64>,
    pub system_throughput: f64,
    pub outcomes: Vec<Outcome>,
    /// Solver effort spent choosing the next slot's channels (strong mode).
    pub solver: Option<SolverStats>,
}

/// Plays one slot and advances `state` to the next one.
pub fn run_slot(config: &SimConfig, world: &World, state: &mut SimState) -> Result<SlotMetrics> {
    let (n, m) = (world.n_users(), world.n_channels());
    let real = realize_slot(
        world,
        &state.channels,
        &state.choices,
        &mut state.streams.contention,
        &mut state.streams.fading,
    );
    let fresh = fuse_recommendations(&real.reports, &world.topology.social, m, world.fusion)?;
    let mut solver = None;
    let next = match &mut state.policy {
        PolicyState::Strong => {
            let idle_probs = (0..n)
                .map(|u| {
                    fresh
                        .row(u)
                        .iter()
                        .zip(&world.channels)
                        .map(|(&s, p)| idle_probability_from_state(p, s))
                        .collect()
                })
                .collect();
            let game = GameInstance::new(
                &world.topology.interference,
                &world.contention,
                world.fading.means(),
                idle_probs,
            )?;
            let initial = StrategyProfile::new(state.choices.clone(), m)?;
            let sol = solve_nash(&game, initial, config.max_rounds);
            if !sol.converged || !verify_nash(&game, &sol.profile) {
                return Err(Error::Consistency(format!(
                    "slot {}: best-response dynamics did not reach a verified equilibrium within {} rounds",
                    state.slot, config.max_rounds
                )));
            }
            solver = Some(SolverStats {
                iterations: sol.iterations,
                evaluations: sol.evaluations,
            });
            sol.profile.into_choices()
        }
        PolicyState::Weak { table } => {
            let scale = config.payoff_scale(world);
            let observations: Vec<Observation> = (0..n)
                .map(|u| {
                    let ch = state.choices[u];
                    Observation {
                        channel: ch,
                        state_at_choice: state.rec.row(u)[ch],
                        payoff: real.throughput[u] / scale,
                    }
                })
                .collect();
            learning_step(
                table,
                &config.learner,
                &observations,
                &fresh,
                state.slot,
                &mut state.streams.policy,
            )
        }
        PolicyState::StaticRec => (0..n)
            .map(|u| static_recommendation_choice(fresh.row(u), config.p_rec, &mut state.streams.policy))
            .collect(),
        PolicyState::Belief { beliefs } => {
            let social = &world.topology.social;
            for (u, belief) in beliefs.iter_mut().enumerate() {
                let own = world.fusion.include_own_report.then_some(u);
                for &k in social.adjacent(u).iter().chain(own.iter()) {
                    let r = &real.reports[k];
                    belief_update(belief, r.channel, r.sensed.is_idle());
                }
            }
            beliefs
                .iter()
                .map(|b| belief_choice(b, &mut state.streams.policy))
                .collect()
        }
    };
    let metrics = SlotMetrics {
        slot: state.slot,
        choices: std::mem::replace(&mut state.choices, next),
        channel_idle: state.channels.states.iter().map(|s| s.is_idle()).collect(),
        system_throughput: real.throughput.iter().sum(),
        throughput: real.throughput,
        outcomes: real.outcomes,
        solver,
    };
    state.rec = fresh;
    if !state.hold_channels {
        state.channels = step_channels(&world.channels, &state.channels, &mut state.streams.channel)?;
    } else {
        state.channels.slot += 1;
    }
    state.slot += 1;
    Ok(metrics)
}
