//! Oracle and invariant suites behind the `validate` subcommand.

use rand::{Rng, SeedableRng};

use crate::channel::{step_channels, ChannelParams, ChannelStateVector, FadingKind};
use crate::engine::{build_world, run_replication, run_replication_with, Policy, PolicyState, SimConfig, SocialGraphSpec};
use crate::learn::{
    check_contraction_condition, estimate_operator_table, residual_against, softmax_gap,
    AlphaSchedule, LearningContext, PerceptionTable,
};
use crate::oracle::{check_potential_signs, check_solver, SmallGame};
use crate::recommend::RecState;
use crate::rng::{Purpose, RandomStreamPlan, SimRng};

pub const SUITES: [&str; 6] = [
    "potential-oracle",
    "nash-oracle",
    "contraction",
    "fixed-point",
    "stationary",
    "gap-bound",
];

/// Outcome of one suite: a pass/fail count plus one line per check.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: usize,
    pub failed: usize,
    pub lines: Vec<String>,
}

impl SuiteReport {
    fn new(suite: &str) -> Self {
        Self {
            suite: suite.to_string(),
            passed: 0,
            failed: 0,
            lines: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, line: String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        self.lines.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    pub fn ok(&self) -> bool {
        self.failed == 0 && self.passed > 0
    }
}

/// Sizes of the default suites run from the command line.
#[derive(Debug, Clone, Copy)]
pub struct SuiteSizes {
    pub game_instances: usize,
    pub stationary_slots: usize,
    pub learning_instances: usize,
    pub learning_slots: usize,
    pub operator_slots: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        Self {
            game_instances: 500,
            stationary_slots: 1_000_000,
            learning_instances: 12,
            learning_slots: 100_000,
            operator_slots: 200_000,
        }
    }
}

pub fn run_suite(name: &str, sizes: &SuiteSizes, seed: u64) -> Option<SuiteReport> {
    Some(match name {
        "potential-oracle" => potential_oracle(sizes.game_instances, seed),
        "nash-oracle" => nash_oracle(sizes.game_instances, seed),
        "contraction" => contraction(seed),
        "fixed-point" => fixed_point(sizes.learning_instances, sizes.learning_slots, sizes.operator_slots, seed),
        "stationary" => stationary(sizes.stationary_slots, seed),
        "gap-bound" => gap_bound(sizes.learning_instances, sizes.learning_slots, sizes.operator_slots, seed),
        _ => return None,
    })
}

pub fn potential_oracle(instances: usize, seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("potential-oracle");
    let mut rng = SimRng::seed_from_u64(seed);
    let mut deviations = 0;
    for i in 0..instances {
        let game = SmallGame::random(&mut rng, 6, 3);
        let check = check_potential_signs(&game);
        deviations += check.deviations;
        if check.violations > 0 {
            report.record(
                false,
                format!(
                    "instance {i}: {} sign violations, first {}",
                    check.violations,
                    check.first_violation.unwrap_or_default()
                ),
            );
        } else {
            report.passed += 1;
        }
    }
    report.lines.push(format!(
        "{instances} instances, {deviations} unilateral deviations checked"
    ));
    report
}

pub fn nash_oracle(instances: usize, seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("nash-oracle");
    let mut rng = SimRng::seed_from_u64(seed);
    for i in 0..instances {
        let game = SmallGame::random(&mut rng, 6, 3);
        let initial: Vec<usize> = (0..game.n_users())
            .map(|_| rng.random_range(0..game.n_channels()))
            .collect();
        let check = check_solver(&game, &initial);
        if check.passed() {
            report.passed += 1;
        } else {
            report.record(false, format!("instance {i}: {check:?}"));
        }
    }
    report.lines.push(format!("{instances} instances solved and enumerated"));
    report
}

/// Long-run idle fraction against `lambda / (lambda + mu)`, with the
/// standard error inflated for the chain's lag-one autocorrelation.
pub fn stationary(slots: usize, seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("stationary");
    let cases = [(0.2, 0.2), (0.3, 0.1), (0.1, 0.3), (0.05, 0.5), (0.7, 0.6)];
    for (k, &(lambda, mu)) in cases.iter().enumerate() {
        let params = [ChannelParams::new(lambda, mu).expect("interior")];
        let mut rng = RandomStreamPlan::new(seed, k as u64).stream(Purpose::ChannelEvolution);
        let mut state = ChannelStateVector::stationary(&params, &mut rng);
        let mut idle = 0usize;
        for _ in 0..slots {
            idle += state.states[0].is_idle() as usize;
            state = step_channels(&params, &state, &mut rng).expect("one channel");
        }
        let gamma = params[0].stationary_idle_probability();
        let rho = 1.0 - lambda - mu;
        let se = (gamma * (1.0 - gamma) / slots as f64 * (1.0 + rho) / (1.0 - rho)).sqrt();
        let freq = idle as f64 / slots as f64;
        let z = (freq - gamma).abs() / se;
        report.record(
            z < 3.0,
            format!("lambda={lambda} mu={mu}: idle fraction {freq:.6} vs {gamma:.6}, {z:.2} SE"),
        );
    }
    report
}

/// A small learning scenario (N <= 4, M <= 3, constant fading) with beta at
/// half the contraction bound.
pub fn learning_instance<R: Rng + ?Sized>(rng: &mut R, horizon: usize, seed: u64) -> SimConfig {
    let n_users = rng.random_range(2..=4);
    let n_channels = rng.random_range(2..=3);
    let mut c = SimConfig::reference(Policy::Weak);
    c.n_users = n_users;
    c.n_channels = n_channels;
    const TRANSITIONS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
    c.channels = (0..n_channels)
        .map(|_| {
            let l = TRANSITIONS[rng.random_range(0..TRANSITIONS.len())];
            let m = TRANSITIONS[rng.random_range(0..TRANSITIONS.len())];
            ChannelParams::new(l, m).expect("interior")
        })
        .collect();
    c.fading = FadingKind::Constant;
    c.positions = Some(
        (0..n_users)
            .map(|_| (rng.random_range(0.0..150.0), rng.random_range(0.0..150.0)))
            .collect(),
    );
    c.social = SocialGraphSpec::ErdosRenyi { p_link: 0.5 };
    c.horizon_slots = horizon;
    c.replications = 1;
    c.seed = seed;
    c.warmup_fraction = 0.0;
    c.learner.alpha = AlphaSchedule::PerCellHarmonic;
    let plan = RandomStreamPlan::new(seed, 0);
    let world = build_world(&c, &plan).expect("valid instance");
    let check = check_contraction_condition(
        world.fading.max_mean(),
        world.topology.interference.max_degree(),
        1.0,
    );
    c.learner.beta = if check.bound.is_finite() { 0.5 * check.bound } else { 0.5 };
    c
}

struct Converged {
    config: SimConfig,
    table: PerceptionTable,
    op: crate::learn::OperatorTable,
}

fn converge(config: SimConfig, operator_slots: usize) -> Converged {
    let summary = run_replication(&config, 0).expect("valid instance");
    let table = summary.table.expect("weak mode keeps a table");
    let plan = RandomStreamPlan::new(config.seed, 0);
    let world = build_world(&config, &plan).expect("valid instance");
    let ctx = LearningContext {
        world: &world,
        beta: config.learner.beta,
        payoff_scale: config.payoff_scale(&world),
    };
    let mut rng = plan.stream(Purpose::Diagnostics);
    let op = estimate_operator_table(&ctx, &table, operator_slots, &mut rng);
    Converged { config, table, op }
}

pub fn fixed_point(instances: usize, slots: usize, operator_slots: usize, seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("fixed-point");
    let mut rng = SimRng::seed_from_u64(seed);
    for i in 0..instances {
        let config = learning_instance(&mut rng, slots, seed.wrapping_add(i as u64));
        let c = converge(config, operator_slots);
        let r = residual_against(&c.table, &c.op);
        report.record(
            r.within(3.0),
            format!(
                "instance {i} (N={}, M={}, beta={:.3e}): max residual {:.4} Mbps vs 3 x {:.4} combined SE over {} cells, worst cell {:.2} SE ({} unvisited, {} unrealized)",
                c.config.n_users,
                c.config.n_channels,
                c.config.learner.beta,
                r.max_residual,
                r.max_combined_se,
                r.cells_checked,
                r.max_z,
                r.excluded_unvisited,
                r.excluded_unrealized
            ),
        );
    }
    report
}

pub fn gap_bound(instances: usize, slots: usize, operator_slots: usize, seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("gap-bound");
    let mut rng = SimRng::seed_from_u64(seed ^ 0x5eed);
    for i in 0..instances {
        let config = learning_instance(&mut rng, slots, seed.wrapping_add(1000 + i as u64));
        let c = converge(config, operator_slots);
        let (mut checked, mut worst_margin, mut bad) = (0usize, f64::NEG_INFINITY, 0usize);
        let mut bound = 0.0;
        for user in 0..c.config.n_users {
            for row in c.op.realized_rows(user) {
                let g = softmax_gap(&c.table, &c.op, user, &row, c.config.learner.beta);
                checked += 1;
                bound = g.bound;
                worst_margin = worst_margin.max(g.gap - g.bound - 3.0 * g.std_error);
                if !g.within(3.0) {
                    bad += 1;
                }
            }
        }
        report.record(
            bad == 0 && checked > 0,
            format!(
                "instance {i}: {checked} (user, recommendation row) pairs, {bad} over bound {:.3}; worst gap - bound - 3 SE = {worst_margin:.4}",
                bound
            ),
        );
    }
    report
}

/// Max-norm perception change between consecutive windows should shrink on
/// instances inside the contraction bound.
pub fn contraction(seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("contraction");
    let c = check_contraction_condition(50.0, 5, 0.001);
    report.record(
        c.satisfied && (c.bound - 0.002).abs() < 1e-15 && (c.modulus - 0.5).abs() < 1e-12,
        format!("B_max=50, degree 5, beta=0.001: bound {}, modulus {}", c.bound, c.modulus),
    );
    let c = check_contraction_condition(50.0, 5, 3.0);
    report.record(
        !c.satisfied && (c.modulus - 1500.0).abs() < 1e-9,
        format!("B_max=50, degree 5, beta=3: satisfied={}, modulus {}", c.satisfied, c.modulus),
    );
    let c = check_contraction_condition(50.0, 0, 1e6);
    report.record(c.satisfied && c.bound.is_infinite(), "degree 0 is always satisfied".into());

    let mut rng = SimRng::seed_from_u64(seed);
    for i in 0..4 {
        let window = 2000;
        let config = learning_instance(&mut rng, 40 * window, seed.wrapping_add(7 + i));
        let mut snapshots: Vec<Vec<f64>> = Vec::new();
        run_replication_with(&config, 0, |_, state, m| {
            if (m.slot + 1) % window as u64 == 0 {
                if let PolicyState::Weak { table } = &state.policy {
                    snapshots.push(flatten(table));
                }
            }
        })
        .expect("valid instance");
        let diffs: Vec<f64> = snapshots
            .windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .collect();
        let q = diffs.len() / 4;
        let head = diffs[..q].iter().sum::<f64>() / q as f64;
        let tail = diffs[diffs.len() - q..].iter().sum::<f64>() / q as f64;
        report.record(
            tail < head,
            format!(
                "instance {i}: mean window change {head:.4} in the first quarter, {tail:.4} in the last"
            ),
        );
    }
    report
}

fn flatten(table: &PerceptionTable) -> Vec<f64> {
    let mut out = Vec::new();
    for n in 0..table.n_users() {
        for m in 0..table.n_channels() {
            for s in RecState::ALL {
                out.push(table.value(n, m, s));
            }
        }
    }
    out
}
