//! Slot protocol orchestration, replications and sweeps.

use std::sync::Arc;

use rand::Rng;

use crate::channel::{ChannelParams, FadingKind, FadingModel};
use crate::error::{Error, Result};
use crate::learn::LearnerConfig;
use crate::recommend::FusionOptions;
use crate::rng::{Purpose, RandomStreamPlan};
use crate::topology::{
    build_interference_graph, generate_er_social_graph, place_uniform, select_social_graph,
    EdgeList, Selection, Topology, UserParams,
};

mod experiment;
mod replication;
mod slot;
mod world;

pub use experiment::{run_experiment, worker_pool, PointSummary, Sweep, SweepAxis, WORKERS_ENV};
pub use replication::{run_replication, run_replication_with, ReplicationSummary};
pub use slot::{run_slot, PolicyState, SimState, SlotMetrics, SolverStats, Streams};
pub use world::{realize_slot, Outcome, Realization, World};

/// Upper limits keeping the dense interference matrix and per-user tables
/// within memory.
pub const MAX_USERS: usize = 5000;
pub const MAX_CHANNELS: usize = 1000;

/// Channel-selection policy run in stage five of every slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    /// Per-slot Nash equilibrium of the expected-throughput game.
    Strong,
    /// Distributed reinforcement learning.
    Weak,
    StaticRec,
    Belief,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Strong => "strong",
            Policy::Weak => "weak",
            Policy::StaticRec => "static-rec",
            Policy::Belief => "belief",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "strong" => Policy::Strong,
            "weak" => Policy::Weak,
            "static-rec" => Policy::StaticRec,
            "belief" => Policy::Belief,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SocialGraphSpec {
    ErdosRenyi { p_link: f64 },
    Trace {
        trace: Arc<EdgeList>,
        selection: Selection,
    },
}

/// A fully validated simulation setup for one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_users: usize,
    pub n_channels: usize,
    pub horizon_slots: usize,
    pub replications: usize,
    pub seed: u64,
    pub policy: Policy,
    /// One entry per channel.
    pub channels: Vec<ChannelParams>,
    pub fading: FadingKind,
    pub area_side: f64,
    pub delta: f64,
    /// Explicit user positions; random uniform placement when absent.
    pub positions: Option<Vec<(f64, f64)>>,
    pub social: SocialGraphSpec,
    /// Contention probabilities are drawn uniformly from this set.
    pub contention_set: Vec<f64>,
    /// Mean throughputs (Mbps) are drawn uniformly from this set.
    pub means_set: Vec<f64>,
    /// Draw one mean per user (shared by all channels) instead of per (user, channel).
    pub per_user_means: bool,
    pub learner: LearnerConfig,
    pub p_rec: f64,
    pub fusion: FusionOptions,
    /// Leading fraction of slots excluded from time averages.
    pub warmup_fraction: f64,
    /// Round budget of the Nash solver (each round is N iterations).
    pub max_rounds: usize,
    /// Slots of frozen-policy simulation used for the weak-mode fixed-point
    /// residual; zero skips the diagnostic.
    pub residual_slots: usize,
}

impl SimConfig {
    /// The reference scenario: 20 users, 5 channels, `lambda = mu = 0.2`,
    /// 500 m square, 100 m interference range, ER social graph.
    pub fn reference(policy: Policy) -> Self {
        let n_channels = 5;
        Self {
            n_users: 20,
            n_channels,
            horizon_slots: 5000,
            replications: 20,
            seed: 1,
            policy,
            channels: vec![ChannelParams::new(0.2, 0.2).unwrap(); n_channels],
            fading: FadingKind::Exponential,
            area_side: 500.0,
            delta: 100.0,
            positions: None,
            social: SocialGraphSpec::ErdosRenyi { p_link: 0.2 },
            contention_set: vec![0.1, 0.2, 0.3],
            means_set: vec![10.0, 20.0, 30.0, 40.0, 50.0],
            per_user_means: false,
            learner: LearnerConfig::default(),
            p_rec: 0.5,
            fusion: FusionOptions::default(),
            warmup_fraction: 0.1,
            max_rounds: 1000,
            residual_slots: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, reason: String| Err(Error::config(key, reason));
        if self.n_users == 0 {
            return fail("users.count", "must be at least 1".into());
        }
        if self.n_users > MAX_USERS {
            return fail("users.count", format!("at most {MAX_USERS} users are supported"));
        }
        if self.n_channels == 0 {
            return fail("channels.count", "must be at least 1".into());
        }
        if self.n_channels > MAX_CHANNELS {
            return fail("channels.count", format!("at most {MAX_CHANNELS} channels are supported"));
        }
        if self.channels.len() != self.n_channels {
            return fail(
                "channels",
                format!("{} parameter sets for {} channels", self.channels.len(), self.n_channels),
            );
        }
        if self.horizon_slots == 0 {
            return fail("run.horizon_slots", "must be at least 1".into());
        }
        if self.replications == 0 {
            return fail("run.replications", "must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return fail("topology.delta", format!("{} must be > 0", self.delta));
        }
        if !(self.area_side > 0.0 && self.area_side.is_finite()) {
            return fail("users.area_side", format!("{} must be > 0", self.area_side));
        }
        if let Some(pos) = &self.positions {
            if pos.len() != self.n_users {
                return fail(
                    "users.positions",
                    format!("{} positions for {} users", pos.len(), self.n_users),
                );
            }
            if pos.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                return fail("users.positions", "coordinates must be finite".into());
            }
        }
        match &self.social {
            SocialGraphSpec::ErdosRenyi { p_link } => {
                if !(0.0..=1.0).contains(p_link) {
                    return fail("topology.p_link", format!("{p_link} is not a probability"));
                }
            }
            SocialGraphSpec::Trace { trace, .. } => {
                if trace.nodes().len() < self.n_users {
                    return fail(
                        "topology.edgelist_path",
                        format!(
                            "trace has {} distinct nodes but {} users are configured",
                            trace.nodes().len(),
                            self.n_users
                        ),
                    );
                }
            }
        }
        if self.contention_set.is_empty() {
            return fail("users.contention_probs", "must not be empty".into());
        }
        for &p in &self.contention_set {
            if !(p > 0.0 && p < 1.0) {
                return fail("users.contention_probs", format!("{p} outside (0, 1)"));
            }
        }
        if self.means_set.is_empty() {
            return fail("users.throughput_means", "must not be empty".into());
        }
        for &b in &self.means_set {
            if !(b > 0.0 && b.is_finite()) {
                return fail("users.throughput_means", format!("{b} must be > 0"));
            }
        }
        if !(self.learner.beta > 0.0 && self.learner.beta.is_finite()) {
            return fail("policy.beta", format!("{} must be > 0", self.learner.beta));
        }
        if let crate::learn::AlphaSchedule::Constant(a) = self.learner.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return fail("policy.alpha_constant", format!("{a} outside (0, 1]"));
            }
        }
        if !self.learner.initial_value.is_finite() || self.learner.initial_value < 0.0 {
            return fail("policy.initial_value", "must be finite and >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.p_rec) {
            return fail("policy.p_rec", format!("{} outside [0, 1]", self.p_rec));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return fail("run.warmup_fraction", format!("{} outside [0, 1)", self.warmup_fraction));
        }
        if self.max_rounds == 0 {
            return fail("policy.max_rounds", "must be at least 1".into());
        }
        Ok(())
    }

    /// Slots excluded from averages at the start of a run.
    pub fn warmup_slots(&self) -> usize {
        (self.warmup_fraction * self.horizon_slots as f64).floor() as usize
    }

    /// Factor applied to payoffs before learning.
    pub fn payoff_scale(&self, world: &World) -> f64 {
        if self.learner.normalize_payoffs {
            world.fading.max_mean()
        } else {
            1.0
        }
    }
}

fn pick<R: Rng + ?Sized>(set: &[f64], rng: &mut R) -> f64 {
    set[rng.random_range(0..set.len())]
}

/// Builds the replication's scenario from the assignment and graph streams.
pub fn build_world(config: &SimConfig, plan: &RandomStreamPlan) -> Result<World> {
    config.validate()?;
    let n = config.n_users;
    let mut assign = plan.stream(Purpose::Assignment);
    let positions = match &config.positions {
        Some(p) => p.clone(),
        None => place_uniform(n, config.area_side, &mut assign),
    };
    let users = positions
        .iter()
        .map(|&pos| UserParams::new(pos, pick(&config.contention_set, &mut assign)))
        .collect::<Result<Vec<_>>>()?;
    let means: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            if config.per_user_means {
                vec![pick(&config.means_set, &mut assign); config.n_channels]
            } else {
                (0..config.n_channels)
                    .map(|_| pick(&config.means_set, &mut assign))
                    .collect()
            }
        })
        .collect();
    let fading = FadingModel::new(config.fading, means)?;
    let interference = build_interference_graph(&users, config.delta);
    let mut graph_rng = plan.stream(Purpose::GraphGeneration);
    let (social, trace_ids) = match &config.social {
        SocialGraphSpec::ErdosRenyi { p_link } => {
            (generate_er_social_graph(n, *p_link, &mut graph_rng), None)
        }
        SocialGraphSpec::Trace { trace, selection } => {
            let (g, ids) = select_social_graph(trace, n, *selection, &mut graph_rng)?;
            (g, Some(ids))
        }
    };
    let topology = Topology::new(interference, social, config.delta)?;
    let mut world = World::new(config.channels.clone(), users, fading, topology, config.fusion);
    world.trace_ids = trace_ids;
    Ok(world)
}
