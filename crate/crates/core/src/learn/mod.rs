//! Weak-information distributed learning.
//!
//! Each user keeps a perception `V[m][i]` of the throughput it gets from
//! channel `m` when that channel's recommendation state is `i`, updates the
//! cell it just used with the realized payoff, and picks the next channel
//! from a Boltzmann distribution over the perceptions selected by its current
//! recommendation states.

use std::fmt::Write as _;

use rand::Rng;

use crate::recommend::{RecState, RecommendationState};

mod operator;

pub use operator::{
    estimate_expected_throughput_operator, estimate_operator_table, fixed_point_residual,
    residual_against, softmax_gap, CellEstimate, GapReport, LearningContext, OperatorTable,
    ResidualReport,
};

/// Step-size rule for the perception update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSchedule {
    /// `1 / (C + 1)` with `C` the cell's prior visit count, so each cell holds
    /// the running mean of its payoffs.
    PerCellHarmonic,
    /// `1 / t` with `t` the 1-based slot index.
    GlobalHarmonic,
    Constant(f64),
}

impl AlphaSchedule {
    pub fn step(&self, visits: u64, slot: u64) -> f64 {
        match *self {
            AlphaSchedule::PerCellHarmonic => 1.0 / (visits as f64 + 1.0),
            AlphaSchedule::GlobalHarmonic => 1.0 / (slot as f64 + 1.0),
            AlphaSchedule::Constant(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    /// Boltzmann inverse temperature, in 1 / (payoff unit).
    pub beta: f64,
    pub alpha: AlphaSchedule,
    pub initial_value: f64,
    /// Divide payoffs by the largest mean throughput before learning.
    pub normalize_payoffs: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            beta: 3.0,
            alpha: AlphaSchedule::PerCellHarmonic,
            initial_value: 1.0,
            normalize_payoffs: false,
        }
    }
}

/// Perceptions and visit statistics for all users, `[user][channel][state]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionTable {
    n_users: usize,
    n_channels: usize,
    values: Vec<f64>,
    visits: Vec<u64>,
    payoff_sum: Vec<f64>,
    payoff_sq_sum: Vec<f64>,
}

impl PerceptionTable {
    pub fn new(n_users: usize, n_channels: usize, initial_value: f64) -> Self {
        let cells = n_users * n_channels * 3;
        Self {
            n_users,
            n_channels,
            values: vec![initial_value; cells],
            visits: vec![0; cells],
            payoff_sum: vec![0.0; cells],
            payoff_sq_sum: vec![0.0; cells],
        }
    }

    fn idx(&self, user: usize, channel: usize, state: RecState) -> usize {
        debug_assert!(user < self.n_users && channel < self.n_channels);
        (user * self.n_channels + channel) * 3 + state.index()
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn value(&self, user: usize, channel: usize, state: RecState) -> f64 {
        self.values[self.idx(user, channel, state)]
    }

    pub fn set_value(&mut self, user: usize, channel: usize, state: RecState, v: f64) {
        let i = self.idx(user, channel, state);
        self.values[i] = v;
    }

    pub fn visits(&self, user: usize, channel: usize, state: RecState) -> u64 {
        self.visits[self.idx(user, channel, state)]
    }

    /// Standard error of the mean payoff received in a cell, treating visits
    /// as independent. `None` with fewer than two visits.
    pub fn payoff_std_error(&self, user: usize, channel: usize, state: RecState) -> Option<f64> {
        let i = self.idx(user, channel, state);
        let c = self.visits[i];
        if c < 2 {
            return None;
        }
        let c = c as f64;
        let mean = self.payoff_sum[i] / c;
        let var = ((self.payoff_sq_sum[i] - c * mean * mean) / (c - 1.0)).max(0.0);
        Some((var / c).sqrt())
    }

    /// Tab-separated dump keyed by (user, channel, signed state). Values are
    /// multiplied by `scale` to report them in Mbps.
    pub fn dump(&self, scale: f64) -> String {
        let mut out = String::from("user\tchannel\tstate\tvalue\tvisits\n");
        for n in 0..self.n_users {
            for m in 0..self.n_channels {
                for s in RecState::ALL {
                    let i = self.idx(n, m, s);
                    let _ = writeln!(
                        out,
                        "{n}\t{m}\t{}\t{}\t{}",
                        s.signed(),
                        self.values[i] * scale,
                        self.visits[i]
                    );
                }
            }
        }
        out
    }
}

/// Applies the smoothing update to the single cell `(user, channel, state)`.
/// `slot` is the 0-based slot index, used only by the global schedule.
pub fn update_perception(
    table: &mut PerceptionTable,
    user: usize,
    channel: usize,
    state: RecState,
    payoff: f64,
    config: &LearnerConfig,
    slot: u64,
) {
    debug_assert!(payoff >= 0.0);
    let i = table.idx(user, channel, state);
    let alpha = config.alpha.step(table.visits[i], slot);
    table.values[i] = (1.0 - alpha) * table.values[i] + alpha * payoff;
    table.visits[i] += 1;
    table.payoff_sum[i] += payoff;
    table.payoff_sq_sum[i] += payoff * payoff;
}

/// A probability vector over channels.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedStrategy(pub Vec<f64>);

impl MixedStrategy {
    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    /// Inverse-CDF draw. Falls back to the last channel on rounding overrun.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.0, rng.random::<f64>())
    }
}

pub(crate) fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

/// Softmax of `beta * V[m][I_m]` over channels, with max subtraction.
pub fn boltzmann_strategy(
    table: &PerceptionTable,
    user: usize,
    rec_state: &[RecState],
    beta: f64,
) -> MixedStrategy {
    let logits: Vec<f64> = rec_state
        .iter()
        .enumerate()
        .map(|(m, &s)| beta * table.value(user, m, s))
        .collect();
    MixedStrategy(softmax(&logits))
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionCheck {
    pub satisfied: bool,
    /// Largest admissible beta; infinite without interference.
    pub bound: f64,
    /// `2 * beta * B_max * degree_max`.
    pub modulus: f64,
}

/// Sufficient condition for the expected-throughput map to be a max-norm
/// contraction: `beta < 1 / (2 * B_max * degree_max)`.
pub fn check_contraction_condition(b_max: f64, degree_max: usize, beta: f64) -> ContractionCheck {
    let modulus = 2.0 * beta * b_max * degree_max as f64;
    if degree_max == 0 {
        return ContractionCheck {
            satisfied: true,
            bound: f64::INFINITY,
            modulus,
        };
    }
    let bound = 1.0 / (2.0 * b_max * degree_max as f64);
    ContractionCheck {
        satisfied: beta < bound,
        bound,
        modulus,
    }
}

/// What one user saw in the slot just played.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub channel: usize,
    /// Recommendation state of `channel` when it was chosen.
    pub state_at_choice: RecState,
    /// Realized payoff in learning units (zero on busy or lost contention).
    pub payoff: f64,
}

/// One slot of the distributed learner for every user: update the played
/// cell, then draw the next channel under the fresh recommendation states.
/// Users are processed in index order from a single stream.
pub fn learning_step<R: Rng + ?Sized>(
    table: &mut PerceptionTable,
    config: &LearnerConfig,
    observations: &[Observation],
    fresh: &RecommendationState,
    slot: u64,
    rng: &mut R,
) -> Vec<usize> {
    observations
        .iter()
        .enumerate()
        .map(|(user, obs)| {
            update_perception(
                table,
                user,
                obs.channel,
                obs.state_at_choice,
                obs.payoff,
                config,
                slot,
            );
            boltzmann_strategy(table, user, fresh.row(user), config.beta).sample(rng)
        })
        .collect()
}
