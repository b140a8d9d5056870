//! Brute-force reference computations for the stage game.
//!
//! Everything here works from raw arrays and recomputes utilities with its
//! own loops, so it can check the `game` module without sharing code paths.
//! Used by the `validate` suites and by the test suite.

use rand::Rng;

use crate::game::{self, GameInstance, StrategyProfile, REL_TOL};
use crate::topology::Graph;

/// A small random game in raw form.
#[derive(Debug, Clone)]
pub struct SmallGame {
    pub adjacency: Vec<Vec<bool>>,
    pub contention: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub idle_probs: Vec<Vec<f64>>,
}

impl SmallGame {
    pub fn n_users(&self) -> usize {
        self.contention.len()
    }

    pub fn n_channels(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn graph(&self) -> Graph {
        let n = self.n_users();
        Graph::from_edges(
            n,
            (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)))
                .filter(|&(a, b)| self.adjacency[a][b]),
        )
    }

    /// Draws an instance with `1..=max_users` users and `1..=max_channels`
    /// channels. Half the draws use the discrete parameter sets of the
    /// reference scenario (which produces exact utility ties), half use
    /// continuous values.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_users: usize, max_channels: usize) -> Self {
        let n = rng.random_range(1..=max_users);
        let m = rng.random_range(1..=max_channels);
        let discrete = rng.random_bool(0.5);
        let density: f64 = rng.random_range(0.2..1.0);
        let mut adjacency = vec![vec![false; n]; n];
        for a in 0..n {
            for b in a + 1..n {
                let e = rng.random_bool(density);
                adjacency[a][b] = e;
                adjacency[b][a] = e;
            }
        }
        let contention = (0..n)
            .map(|_| {
                if discrete {
                    [0.1, 0.2, 0.3][rng.random_range(0..3)]
                } else {
                    rng.random_range(0.01..0.99)
                }
            })
            .collect();
        let means = (0..n)
            .map(|_| {
                (0..m)
                    .map(|_| {
                        if discrete {
                            10.0 * rng.random_range(1..=5) as f64
                        } else {
                            rng.random_range(0.5..60.0)
                        }
                    })
                    .collect()
            })
            .collect();
        // idle probabilities from the three-way mapping of random channel params
        let channel_params: Vec<(f64, f64)> = (0..m)
            .map(|_| {
                if discrete {
                    (0.2, 0.2)
                } else {
                    (rng.random_range(0.02..0.98), rng.random_range(0.02..0.98))
                }
            })
            .collect();
        let idle_probs = (0..n)
            .map(|_| {
                channel_params
                    .iter()
                    .map(|&(l, mu)| match rng.random_range(0..3) {
                        0 => 1.0 - mu,
                        1 => l,
                        _ => l / (l + mu),
                    })
                    .collect()
            })
            .collect();
        Self {
            adjacency,
            contention,
            means,
            idle_probs,
        }
    }

    /// Direct evaluation of the expected-throughput formula.
    pub fn utility(&self, choices: &[usize], user: usize) -> f64 {
        let a = choices[user];
        let mut q = self.contention[user];
        for k in 0..self.n_users() {
            if k != user && self.adjacency[user][k] && choices[k] == a {
                q *= 1.0 - self.contention[k];
            }
        }
        self.idle_probs[user][a] * self.means[user][a] * q
    }

    fn is_nash(&self, choices: &[usize]) -> bool {
        let mut dev = choices.to_vec();
        (0..self.n_users()).all(|n| {
            let u = self.utility(choices, n);
            (0..self.n_channels()).all(|m| {
                dev[n] = m;
                let better = self.utility(&dev, n) > u * (1.0 + REL_TOL);
                dev[n] = choices[n];
                !better
            })
        })
    }

    /// All pure Nash equilibria, by enumerating every profile.
    pub fn nash_set(&self) -> Vec<Vec<usize>> {
        all_profiles(self.n_users(), self.n_channels())
            .filter(|a| self.is_nash(a))
            .collect()
    }
}

/// Every profile in `{0..m}^n`, in mixed-radix order (user 0 fastest).
pub fn all_profiles(n: usize, m: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = m.pow(n as u32);
    (0..total).map(move |mut code| {
        (0..n)
            .map(|_| {
                let c = code % m;
                code /= m;
                c
            })
            .collect()
    })
}

fn encode(choices: &[usize], m: usize) -> usize {
    choices.iter().rev().fold(0, |acc, &c| acc * m + c)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PotentialCheck {
    pub deviations: usize,
    pub violations: usize,
    pub first_violation: Option<String>,
}

/// Compares the sign of every unilateral utility change (computed directly)
/// with the sign of the corresponding potential change.
pub fn check_potential_signs(instance: &SmallGame) -> PotentialCheck {
    let graph = instance.graph();
    let game = GameInstance::new(
        &graph,
        &instance.contention,
        &instance.means,
        instance.idle_probs.clone(),
    )
    .expect("oracle instances are valid");
    let (n, m) = (instance.n_users(), instance.n_channels());
    let profiles: Vec<Vec<usize>> = all_profiles(n, m).collect();
    let (phi, scale): (Vec<f64>, Vec<f64>) = profiles
        .iter()
        .map(|a| {
            let sp = StrategyProfile::new(a.clone(), m).unwrap();
            (game::potential(&game, &sp), game::potential_scale(&game, &sp))
        })
        .unzip();
    let mut report = PotentialCheck::default();
    for a in &profiles {
        let code = encode(a, m);
        for user in 0..n {
            let u = instance.utility(a, user);
            for alt in 0..m {
                if alt == a[user] {
                    continue;
                }
                let mut b = a.clone();
                b[user] = alt;
                let code_b = encode(&b, m);
                let u_b = instance.utility(&b, user);
                let su = game::sign_with_tolerance(u_b - u, u.max(u_b));
                let sp = game::sign_with_tolerance(
                    phi[code_b] - phi[code],
                    scale[code].max(scale[code_b]),
                );
                report.deviations += 1;
                if su != sp {
                    report.violations += 1;
                    report.first_violation.get_or_insert_with(|| {
                        format!(
                            "profile {a:?}, user {user} -> {alt}: dU={:e} dPhi={:e}",
                            u_b - u,
                            phi[code_b] - phi[code]
                        )
                    });
                }
            }
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NashCheck {
    pub converged: bool,
    pub in_enumerated_set: bool,
    pub verified: bool,
}

impl NashCheck {
    pub fn passed(&self) -> bool {
        self.converged && self.in_enumerated_set && self.verified
    }
}

/// Runs the solver from `initial` and checks its output against enumeration.
pub fn check_solver(instance: &SmallGame, initial: &[usize]) -> NashCheck {
    let graph = instance.graph();
    let game = GameInstance::new(
        &graph,
        &instance.contention,
        &instance.means,
        instance.idle_probs.clone(),
    )
    .expect("oracle instances are valid");
    let m = instance.n_channels();
    let start = StrategyProfile::new(initial.to_vec(), m).unwrap();
    let sol = game::solve_nash(&game, start, 1000);
    let set = instance.nash_set();
    NashCheck {
        converged: sol.converged,
        in_enumerated_set: set.iter().any(|a| a.as_slice() == sol.profile.choices()),
        verified: game::verify_nash(&game, &sol.profile),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use rand::SeedableRng;

    #[test]
    fn profile_enumeration_is_complete() {
        let all: Vec<_> = all_profiles(3, 2).collect();
        assert_eq!(all.len(), 8);
        for (code, a) in all.iter().enumerate() {
            assert_eq!(encode(a, 2), code);
        }
        assert_eq!(all_profiles(0, 3).count(), 1);
    }

    #[test]
    fn two_identical_interferers_have_two_equilibria() {
        let g = SmallGame {
            adjacency: vec![vec![false, true], vec![true, false]],
            contention: vec![0.3, 0.3],
            means: vec![vec![20.0, 20.0]; 2],
            idle_probs: vec![vec![0.5, 0.5]; 2],
        };
        let mut set = g.nash_set();
        set.sort();
        assert_eq!(set, vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn random_instances_within_bounds() {
        let mut rng = SimRng::seed_from_u64(1);
        for _ in 0..100 {
            let g = SmallGame::random(&mut rng, 6, 3);
            assert!((1..=6).contains(&g.n_users()));
            assert!((1..=3).contains(&g.n_channels()));
            assert!(g.idle_probs.iter().flatten().all(|&w| w > 0.0 && w < 1.0));
            assert!(!g.nash_set().is_empty());
        }
    }
}
