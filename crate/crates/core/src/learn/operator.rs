//! Monte-Carlo estimates of the expected-throughput operator
//! `R[n][m][i](V) = E[U_n | V, I_m^n = i, a_n = m]` and the diagnostics built
//! on it.
//!
//! The estimator freezes the perception table, lets every user play its
//! Boltzmann strategy, and for each (user, channel) records the expected
//! payoff the user would have had on that channel given everyone else's
//! actual choices. Each sample is weighted by the probability the user's
//! strategy put on that channel, which turns the unconditional average into
//! the average conditioned on `a_n = m`.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};

use super::{boltzmann_strategy, MixedStrategy, PerceptionTable};
use crate::channel::{step_channels, ChannelStateVector};
use crate::engine::{realize_slot, World};
use crate::recommend::{fuse_recommendations, RecState, RecommendationState};
use crate::rng::SimRng;

const BATCHES: usize = 32;
const BURN_IN: usize = 1000;

/// The scenario plus the learner settings that define the frozen policy.
#[derive(Debug, Clone, Copy)]
pub struct LearningContext<'a> {
    pub world: &'a World,
    pub beta: f64,
    /// Payoffs are divided by this before they enter the table.
    pub payoff_scale: f64,
}

/// Operator estimate for one cell, in learning units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Sum of strategy weights over qualifying slots.
    pub weight: f64,
    /// Number of slots in which the cell's state was realized.
    pub samples: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    weighted: [f64; BATCHES],
    weights: [f64; BATCHES],
    samples: u64,
}

impl Accumulator {
    fn add(&mut self, batch: usize, w: f64, value: f64) {
        self.weighted[batch] += w * value;
        self.weights[batch] += w;
        self.samples += 1;
    }

    /// Ratio estimate with a batch-means standard error.
    fn finish(&self) -> CellEstimate {
        let a: f64 = self.weighted.iter().sum();
        let w: f64 = self.weights.iter().sum();
        if w <= 0.0 {
            return CellEstimate {
                samples: self.samples,
                ..CellEstimate::default()
            };
        }
        let mean = a / w;
        let used = self.weights.iter().filter(|&&x| x > 0.0).count();
        let std_error = if used < 2 {
            f64::INFINITY
        } else {
            let ss: f64 = self
                .weighted
                .iter()
                .zip(&self.weights)
                .map(|(a_b, w_b)| (a_b - mean * w_b).powi(2))
                .sum();
            (ss * used as f64 / (used as f64 - 1.0)).sqrt() / w
        };
        CellEstimate {
            mean,
            std_error,
            weight: w,
            samples: self.samples,
        }
    }
}

/// Operator estimates for every cell, plus the recommendation rows each user
/// was seen in.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorTable {
    n_users: usize,
    n_channels: usize,
    cells: Vec<CellEstimate>,
    rows: Vec<BTreeSet<Vec<usize>>>,
}

impl OperatorTable {
    pub fn get(&self, user: usize, channel: usize, state: RecState) -> CellEstimate {
        self.cells[(user * self.n_channels + channel) * 3 + state.index()]
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    /// Distinct recommendation rows realized for `user`.
    pub fn realized_rows(&self, user: usize) -> Vec<Vec<RecState>> {
        self.rows[user]
            .iter()
            .map(|r| r.iter().map(|&i| RecState::ALL[i]).collect())
            .collect()
    }
}

/// Expected payoff (learning units) of `user` on `channel` this slot, given
/// the other users' choices and the true channel state. Own and interferers'
/// contention and the fading are integrated out.
fn counterfactual(
    ctx: &LearningContext<'_>,
    states: &ChannelStateVector,
    choices: &[usize],
    user: usize,
    channel: usize,
) -> f64 {
    let w = ctx.world;
    if !states.states[channel].is_idle() {
        return 0.0;
    }
    let q = w
        .topology
        .interference
        .adjacent(user)
        .iter()
        .filter(|&&k| choices[k] == channel)
        .fold(w.contention[user], |q, &k| q * (1.0 - w.contention[k]));
    q * w.fading.mean(user, channel) / ctx.payoff_scale
}

/// Runs the frozen-policy chain and feeds every (user, channel) sample to
/// `visit`. Returns when `visit` returns false or after `max_slots`.
fn simulate<R: Rng + ?Sized>(
    ctx: &LearningContext<'_>,
    table: &PerceptionTable,
    max_slots: usize,
    rng: &mut R,
    mut visit: impl FnMut(usize, &[RecState], &MixedStrategy, &dyn Fn(usize) -> f64) -> bool,
) {
    let world = ctx.world;
    let (n, m) = (world.n_users(), world.n_channels());
    let mut states = ChannelStateVector::stationary(&world.channels, rng);
    let mut rec = RecommendationState::unknown(n, m);
    // Realized throughputs are never read here; fading draws go to a side stream.
    let mut fading_rng = SimRng::seed_from_u64(rng.random());
    for slot in 0..BURN_IN + max_slots {
        let strategies: Vec<MixedStrategy> = (0..n)
            .map(|u| boltzmann_strategy(table, u, rec.row(u), ctx.beta))
            .collect();
        let choices: Vec<usize> = strategies.iter().map(|s| s.sample(rng)).collect();
        if slot >= BURN_IN {
            for user in 0..n {
                let cf = |ch: usize| counterfactual(ctx, &states, &choices, user, ch);
                if !visit(user, rec.row(user), &strategies[user], &cf) {
                    return;
                }
            }
        }
        let real = realize_slot(world, &states, &choices, rng, &mut fading_rng);
        rec = fuse_recommendations(&real.reports, &world.topology.social, m, world.fusion)
            .expect("fusion of truthful reports cannot conflict");
        states = step_channels(&world.channels, &states, rng).expect("dimensions fixed");
    }
}

/// Estimates every cell of the operator from `n_slots` slots of frozen play.
pub fn estimate_operator_table<R: Rng + ?Sized>(
    ctx: &LearningContext<'_>,
    table: &PerceptionTable,
    n_slots: usize,
    rng: &mut R,
) -> OperatorTable {
    let (n, m) = (ctx.world.n_users(), ctx.world.n_channels());
    let mut acc = vec![Accumulator::default(); n * m * 3];
    let mut rows = vec![BTreeSet::new(); n];
    let per_batch = n_slots.div_ceil(BATCHES).max(1);
    let mut counter = 0usize;
    simulate(ctx, table, n_slots, rng, |user, row, sigma, cf| {
        let batch = (counter / n / per_batch).min(BATCHES - 1);
        counter += 1;
        for (ch, &state) in row.iter().enumerate() {
            acc[(user * m + ch) * 3 + state.index()].add(batch, sigma.0[ch], cf(ch));
        }
        rows[user].insert(row.iter().map(|s| s.index()).collect());
        true
    });
    OperatorTable {
        n_users: n,
        n_channels: m,
        cells: acc.iter().map(Accumulator::finish).collect(),
        rows,
    }
}

/// Estimates one cell until its state has been realized `n_samples` times
/// (or a slot budget of `1000 * n_samples` runs out).
#[allow(clippy::too_many_arguments)]
pub fn estimate_expected_throughput_operator<R: Rng + ?Sized>(
    ctx: &LearningContext<'_>,
    table: &PerceptionTable,
    user: usize,
    channel: usize,
    state: RecState,
    n_samples: u64,
    rng: &mut R,
) -> CellEstimate {
    let n_samples = n_samples.max(1);
    let mut acc = Accumulator::default();
    let per_batch = n_samples.div_ceil(BATCHES as u64).max(1);
    let budget = (n_samples as usize).saturating_mul(1000);
    simulate(ctx, table, budget, rng, |u, row, sigma, cf| {
        if u == user && row[channel] == state {
            let batch = ((acc.samples / per_batch) as usize).min(BATCHES - 1);
            acc.add(batch, sigma.0[channel], cf(channel));
        }
        acc.samples < n_samples
    });
    acc.finish()
}

/// Max-norm distance between a table and its operator image over the cells
/// that carry information.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub max_residual: f64,
    /// Largest combined standard error `sqrt(se_R^2 + se_V^2)` over checked cells.
    pub max_combined_se: f64,
    /// Largest per-cell ratio of residual to combined standard error.
    pub max_z: f64,
    /// Cell attaining `max_residual`.
    pub worst_cell: Option<(usize, usize, RecState)>,
    pub cells_checked: usize,
    /// Cells with fewer than two learning visits.
    pub excluded_unvisited: usize,
    /// Visited cells whose state never occurred under the frozen policy.
    pub excluded_unrealized: usize,
}

impl ResidualReport {
    /// Residual within `k` combined standard errors.
    pub fn within(&self, k: f64) -> bool {
        self.cells_checked > 0 && self.max_residual < k * self.max_combined_se
    }
}

pub fn fixed_point_residual<R: Rng + ?Sized>(
    ctx: &LearningContext<'_>,
    table: &PerceptionTable,
    n_slots: usize,
    rng: &mut R,
) -> ResidualReport {
    let op = estimate_operator_table(ctx, table, n_slots, rng);
    residual_against(table, &op)
}

/// Residual of `table` against a precomputed operator estimate.
pub fn residual_against(table: &PerceptionTable, op: &OperatorTable) -> ResidualReport {
    let mut report = ResidualReport {
        max_residual: 0.0,
        max_combined_se: 0.0,
        max_z: 0.0,
        worst_cell: None,
        cells_checked: 0,
        excluded_unvisited: 0,
        excluded_unrealized: 0,
    };
    for n in 0..table.n_users() {
        for m in 0..table.n_channels() {
            for s in RecState::ALL {
                let Some(se_v) = table.payoff_std_error(n, m, s) else {
                    report.excluded_unvisited += 1;
                    continue;
                };
                let est = op.get(n, m, s);
                if est.weight <= 0.0 {
                    report.excluded_unrealized += 1;
                    continue;
                }
                let r = (est.mean - table.value(n, m, s)).abs();
                let se = (est.std_error.powi(2) + se_v.powi(2)).sqrt();
                report.cells_checked += 1;
                if r > report.max_residual || report.worst_cell.is_none() {
                    report.max_residual = r;
                    report.worst_cell = Some((n, m, s));
                }
                report.max_combined_se = report.max_combined_se.max(se);
                if se > 0.0 {
                    report.max_z = report.max_z.max(r / se);
                } else if r > 0.0 {
                    report.max_z = f64::INFINITY;
                }
            }
        }
    }
    report
}

/// Approximation gap of one user's Boltzmann strategy for a given
/// recommendation row, in learning units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub achieved: f64,
    pub optimal: f64,
    pub gap: f64,
    /// `ln(M) / beta`.
    pub bound: f64,
    /// Standard error of `gap`.
    pub std_error: f64,
}

impl GapReport {
    pub fn within(&self, k: f64) -> bool {
        self.gap <= self.bound + k * self.std_error
    }
}

pub fn softmax_gap(
    table: &PerceptionTable,
    op: &OperatorTable,
    user: usize,
    rec_state: &[RecState],
    beta: f64,
) -> GapReport {
    let sigma = boltzmann_strategy(table, user, rec_state, beta);
    let cells: Vec<CellEstimate> = rec_state
        .iter()
        .enumerate()
        .map(|(m, &s)| op.get(user, m, s))
        .collect();
    let achieved: f64 = sigma.0.iter().zip(&cells).map(|(p, c)| p * c.mean).sum();
    let (best, optimal) = cells
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, c)| {
            if c.mean > bv {
                (i, c.mean)
            } else {
                (bi, bv)
            }
        });
    // The gap is linear in the cell estimates with coefficients
    // (1 - sigma_best) on the best cell and -sigma_m elsewhere.
    let var: f64 = cells
        .iter()
        .enumerate()
        .map(|(m, c)| {
            let coef = if m == best { 1.0 - sigma.0[m] } else { sigma.0[m] };
            (coef * c.std_error).powi(2)
        })
        .sum();
    GapReport {
        achieved,
        optimal,
        gap: optimal - achieved,
        bound: (rec_state.len() as f64).ln() / beta,
        std_error: var.sqrt(),
    }
}
