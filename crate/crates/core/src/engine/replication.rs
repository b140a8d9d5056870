use crate::error::Result;
use crate::learn::{
    check_contraction_condition, fixed_point_residual, ContractionCheck, LearningContext,
    PerceptionTable, ResidualReport,
};
use crate::rng::{Purpose, RandomStreamPlan};

use super::{build_world, run_slot, PolicyState, SimConfig, SimState, SlotMetrics, World};

/// Aggregates of one replication. Averages skip the warm-up slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSummary {
    pub replication: u64,
    pub mean_system_throughput: f64,
    pub per_user_throughput: Vec<f64>,
    pub slots_averaged: usize,
    /// Per-slot solver iterations over the averaged slots (strong mode).
    pub iterations: Vec<usize>,
    pub evaluations: Vec<usize>,
    pub mean_iterations: Option<f64>,
    pub max_iterations: Option<usize>,
    /// Contraction check in learning units.
    pub contraction: ContractionCheck,
    pub table: Option<PerceptionTable>,
    pub residual: Option<ResidualReport>,
}

pub fn run_replication(config: &SimConfig, replication: u64) -> Result<ReplicationSummary> {
    run_replication_with(config, replication, |_, _, _| {})
}

/// Like [`run_replication`], calling `observe` after every slot.
pub fn run_replication_with(
    config: &SimConfig,
    replication: u64,
    mut observe: impl FnMut(&World, &SimState, &SlotMetrics),
) -> Result<ReplicationSummary> {
    let plan = RandomStreamPlan::new(config.seed, replication);
    let world = build_world(config, &plan)?;
    let mut state = SimState::new(config, &world, &plan);
    let warmup = config.warmup_slots();
    let n = world.n_users();
    let mut total = 0.0;
    let mut per_user = vec![0.0; n];
    let mut iterations = Vec::new();
    let mut evaluations = Vec::new();
    for t in 0..config.horizon_slots {
        let metrics = run_slot(config, &world, &mut state)?;
        observe(&world, &state, &metrics);
        if t < warmup {
            continue;
        }
        total += metrics.system_throughput;
        per_user
            .iter_mut()
            .zip(&metrics.throughput)
            .for_each(|(acc, x)| *acc += x);
        if let Some(s) = metrics.solver {
            iterations.push(s.iterations);
            evaluations.push(s.evaluations);
        }
    }
    let slots = config.horizon_slots - warmup;
    per_user.iter_mut().for_each(|x| *x /= slots as f64);

    let scale = config.payoff_scale(&world);
    let contraction = check_contraction_condition(
        world.fading.max_mean() / scale,
        world.topology.interference.max_degree(),
        config.learner.beta,
    );
    let table = match state.policy {
        PolicyState::Weak { table } => Some(table),
        _ => None,
    };
    let residual = match &table {
        Some(t) if config.residual_slots > 0 => {
            let ctx = LearningContext {
                world: &world,
                beta: config.learner.beta,
                payoff_scale: scale,
            };
            let mut rng = plan.stream(Purpose::Diagnostics);
            Some(fixed_point_residual(&ctx, t, config.residual_slots, &mut rng))
        }
        _ => None,
    };
    let mean_iterations = (!iterations.is_empty())
        .then(|| iterations.iter().sum::<usize>() as f64 / iterations.len() as f64);
    Ok(ReplicationSummary {
        replication,
        mean_system_throughput: total / slots as f64,
        per_user_throughput: per_user,
        slots_averaged: slots,
        max_iterations: iterations.iter().copied().max(),
        mean_iterations,
        iterations,
        evaluations,
        contraction,
        table,
        residual,
    })
}
