//! The strong-information stage game solved once per slot.
//!
//! A user's expected throughput on its chosen channel is
//! `ω · B · p_n · Π (1 - p_k)` over interfering users `k` on the same channel.
//! The game is an ordinal potential game, so round-robin best response
//! terminates at a pure Nash equilibrium.

use crate::error::{Error, Result};
use crate::topology::Graph;

/// Relative tolerance below which two utilities (or potentials) are equal.
pub const REL_TOL: f64 = 1e-12;

/// `new` strictly exceeds `old` by more than the relative tolerance.
/// Both arguments are expected nonnegative.
pub fn strictly_improves(new: f64, old: f64) -> bool {
    new > old + REL_TOL * old.abs().max(new.abs())
}

/// Sign of `delta` with everything within `REL_TOL * scale` treated as zero.
pub fn sign_with_tolerance(delta: f64, scale: f64) -> i8 {
    if delta.abs() <= REL_TOL * scale.abs() {
        0
    } else if delta > 0.0 {
        1
    } else {
        -1
    }
}

/// Channel choice per user, 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StrategyProfile(Vec<usize>);

impl StrategyProfile {
    pub fn new(choices: Vec<usize>, n_channels: usize) -> Result<Self> {
        if let Some(&bad) = choices.iter().find(|&&c| c >= n_channels) {
            return Err(Error::OutOfRange {
                index: bad,
                len: n_channels,
            });
        }
        Ok(Self(choices))
    }

    /// Everyone on channel 0.
    pub fn lowest(n_users: usize) -> Self {
        Self(vec![0; n_users])
    }

    pub fn choices(&self) -> &[usize] {
        &self.0
    }

    pub fn into_choices(self) -> Vec<usize> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn set(&mut self, user: usize, channel: usize) {
        self.0[user] = channel;
    }
}

impl std::ops::Index<usize> for StrategyProfile {
    type Output = usize;

    fn index(&self, user: usize) -> &usize {
        &self.0[user]
    }
}

/// One slot's game. `idle_probs[n][m]` is user n's predicted idle
/// probability of channel m for the next slot.
#[derive(Debug, Clone)]
pub struct GameInstance<'a> {
    interference: &'a Graph,
    contention: &'a [f64],
    means: &'a [Vec<f64>],
    idle_probs: Vec<Vec<f64>>,
    n_channels: usize,
}

impl<'a> GameInstance<'a> {
    pub fn new(
        interference: &'a Graph,
        contention: &'a [f64],
        means: &'a [Vec<f64>],
        idle_probs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = interference.n();
        if contention.len() != n || means.len() != n || idle_probs.len() != n {
            return Err(Error::config(
                "game",
                format!(
                    "dimension mismatch: {n} users, {} contention probabilities, {} mean rows, {} idle rows",
                    contention.len(),
                    means.len(),
                    idle_probs.len()
                ),
            ));
        }
        let n_channels = means.first().map_or(0, Vec::len);
        for user in 0..n {
            let p = contention[user];
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::config(
                    "users.contention_probs",
                    format!("user {user}: contention probability {p} outside (0, 1)"),
                ));
            }
            if means[user].len() != n_channels || idle_probs[user].len() != n_channels {
                return Err(Error::config("game", format!("user {user}: ragged channel rows")));
            }
            for m in 0..n_channels {
                let (b, w) = (means[user][m], idle_probs[user][m]);
                if !(b > 0.0 && b.is_finite()) {
                    return Err(Error::config(
                        "users.throughput_means",
                        format!("user {user}, channel {m}: mean {b} must be > 0"),
                    ));
                }
                if !(w > 0.0 && w < 1.0) {
                    return Err(Error::config(
                        "channels",
                        format!("user {user}, channel {m}: idle probability {w} outside (0, 1)"),
                    ));
                }
            }
        }
        Ok(Self {
            interference,
            contention,
            means,
            idle_probs,
            n_channels,
        })
    }

    pub fn n_users(&self) -> usize {
        self.interference.n()
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn interference(&self) -> &Graph {
        self.interference
    }

    pub fn contention(&self) -> &[f64] {
        self.contention
    }

    pub fn idle_probs(&self) -> &[Vec<f64>] {
        &self.idle_probs
    }

    /// Success probability if `user` sat on `channel` with everyone else fixed.
    fn success_on(&self, profile: &StrategyProfile, user: usize, channel: usize) -> f64 {
        self.interference
            .adjacent(user)
            .iter()
            .filter(|&&k| profile[k] == channel)
            .fold(self.contention[user], |q, &k| q * (1.0 - self.contention[k]))
    }

    fn utility_on(&self, profile: &StrategyProfile, user: usize, channel: usize) -> f64 {
        self.idle_probs[user][channel]
            * self.means[user][channel]
            * self.success_on(profile, user, channel)
    }
}

pub fn success_probability(game: &GameInstance<'_>, profile: &StrategyProfile, user: usize) -> f64 {
    game.success_on(profile, user, profile[user])
}

pub fn utility(game: &GameInstance<'_>, profile: &StrategyProfile, user: usize) -> f64 {
    game.utility_on(profile, user, profile[user])
}

/// The ordinal potential. Every unilateral utility change has the same sign
/// as the change in this value.
pub fn potential(game: &GameInstance<'_>, profile: &StrategyProfile) -> f64 {
    (0..game.n_users())
        .map(|n| potential_terms(game, profile, n).0)
        .sum()
}

/// User n's contribution and its absolute scale (for tolerance decisions).
fn potential_terms(game: &GameInstance<'_>, profile: &StrategyProfile, n: usize) -> (f64, f64) {
    let p = game.contention;
    let weight = -(1.0 - p[n]).ln();
    let a = profile[n];
    let edge: f64 = game
        .interference
        .adjacent(n)
        .iter()
        .filter(|&&k| profile[k] == a)
        .map(|&k| (1.0 - p[k]).ln())
        .sum::<f64>()
        / 2.0;
    let vertex = (game.idle_probs[n][a] * game.means[n][a] * p[n]).ln();
    (weight * (edge + vertex), weight * (edge.abs() + vertex.abs()))
}

/// Sum of the absolute values of the potential's terms; the natural scale for
/// deciding whether a potential difference is zero.
pub fn potential_scale(game: &GameInstance<'_>, profile: &StrategyProfile) -> f64 {
    (0..game.n_users())
        .map(|n| potential_terms(game, profile, n).1)
        .sum()
}

/// Best channel for `user` against the others' current choices. Keeps the
/// incumbent unless another channel is strictly better; among strictly better
/// channels the exact maximum wins, lowest index first.
pub fn best_response(game: &GameInstance<'_>, profile: &StrategyProfile, user: usize) -> usize {
    let current = profile[user];
    let u_current = game.utility_on(profile, user, current);
    let mut best = current;
    let mut u_best = f64::NEG_INFINITY;
    for m in 0..game.n_channels {
        let u = game.utility_on(profile, user, m);
        if u > u_best {
            best = m;
            u_best = u;
        }
    }
    if best != current && strictly_improves(u_best, u_current) {
        best
    } else {
        current
    }
}

/// One channel switch made by the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Switch {
    /// 0-based iteration index at which the switch happened.
    pub iteration: usize,
    pub user: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashSolution {
    pub profile: StrategyProfile,
    /// Iterations until the profile reached its final value (index of the last
    /// switch plus one; zero when the initial profile was already stable).
    pub iterations: usize,
    /// All best-response evaluations performed, including the closing pass of
    /// `N` consecutive no-change iterations that certifies the equilibrium.
    pub evaluations: usize,
    pub converged: bool,
    pub switches: Vec<Switch>,
}

/// Round-robin asynchronous best response. User `l mod N` moves at iteration
/// `l`; the run stops after `N` consecutive iterations without a switch or
/// after `max_rounds * N` iterations.
pub fn solve_nash(
    game: &GameInstance<'_>,
    initial: StrategyProfile,
    max_rounds: usize,
) -> NashSolution {
    let n = game.n_users();
    let mut profile = initial;
    let mut switches = Vec::new();
    if n == 0 {
        return NashSolution {
            profile,
            iterations: 0,
            evaluations: 0,
            converged: true,
            switches,
        };
    }
    let limit = max_rounds.saturating_mul(n);
    let mut quiet = 0usize;
    let mut l = 0usize;
    while quiet < n && l < limit {
        let user = l % n;
        let from = profile[user];
        let to = best_response(game, &profile, user);
        if to != from {
            profile.set(user, to);
            switches.push(Switch {
                iteration: l,
                user,
                from,
                to,
            });
            quiet = 0;
        } else {
            quiet += 1;
        }
        l += 1;
    }
    NashSolution {
        profile,
        iterations: switches.last().map_or(0, |s| s.iteration + 1),
        evaluations: l,
        converged: quiet >= n,
        switches,
    }
}

/// True iff no user has a channel that strictly improves its utility.
pub fn verify_nash(game: &GameInstance<'_>, profile: &StrategyProfile) -> bool {
    (0..game.n_users()).all(|user| {
        let u = utility(game, profile, user);
        (0..game.n_channels).all(|m| !strictly_improves(game.utility_on(profile, user, m), u))
    })
}
