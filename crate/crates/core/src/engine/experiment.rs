use rayon::prelude::*;

use crate::error::{Error, Result};

use super::{run_replication, Policy, ReplicationSummary, SimConfig, SocialGraphSpec};

/// Environment variable overriding the worker-thread count.
pub const WORKERS_ENV: &str = "SRDSA_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    PLink,
    Delta,
    NUsers,
    Beta,
    PRec,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 5] = [
        SweepAxis::PLink,
        SweepAxis::Delta,
        SweepAxis::NUsers,
        SweepAxis::Beta,
        SweepAxis::PRec,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::PLink => "p_link",
            SweepAxis::Delta => "delta",
            SweepAxis::NUsers => "n_users",
            SweepAxis::Beta => "beta",
            SweepAxis::PRec => "p_rec",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    /// Returns `base` with this axis set to `value`, validated.
    pub fn apply(self, base: &SimConfig, value: f64) -> Result<SimConfig> {
        let key = format!("run.sweep.{}", self.name());
        let mut c = base.clone();
        match self {
            SweepAxis::PLink => match &mut c.social {
                SocialGraphSpec::ErdosRenyi { p_link } => *p_link = value,
                SocialGraphSpec::Trace { .. } => {
                    return Err(Error::config(key, "requires a random social graph"))
                }
            },
            SweepAxis::Delta => c.delta = value,
            SweepAxis::NUsers => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::config(key, format!("{value} is not a positive integer")));
                }
                if c.positions.is_some() {
                    return Err(Error::config(key, "cannot vary the user count with fixed positions"));
                }
                c.n_users = value as usize;
            }
            SweepAxis::Beta => c.learner.beta = value,
            SweepAxis::PRec => c.p_rec = value,
        }
        c.validate()?;
        Ok(c)
    }
}

/// A single-axis sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl Sweep {
    /// Builds a sweep from `(axis name, values)` pairs; more than one axis is
    /// a configuration error, none means a single point.
    pub fn from_pairs(pairs: Vec<(String, Vec<f64>)>) -> Result<Option<Self>> {
        match pairs.len() {
            0 => Ok(None),
            1 => {
                let (name, values) = pairs.into_iter().next().unwrap();
                let axis = SweepAxis::parse(&name).ok_or_else(|| {
                    let valid: Vec<&str> = SweepAxis::ALL.iter().map(|a| a.name()).collect();
                    Error::config(
                        format!("run.sweep.{name}"),
                        format!("unknown sweep axis; expected one of {}", valid.join(", ")),
                    )
                })?;
                if values.is_empty() {
                    return Err(Error::config(format!("run.sweep.{name}"), "no values"));
                }
                Ok(Some(Self { axis, values }))
            }
            _ => {
                let names: Vec<&str> = pairs.iter().map(|(n, _)| n.as_str()).collect();
                Err(Error::config(
                    "run.sweep",
                    format!("exactly one axis may be swept, got {}", names.join(", ")),
                ))
            }
        }
    }
}

/// One (sweep point, policy) cell of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub axis_value: Option<f64>,
    pub policy: Policy,
    pub config: SimConfig,
    pub mean_throughput: f64,
    /// Standard error over replications.
    pub std_error: f64,
    pub mean_iterations: Option<f64>,
    /// Largest contraction modulus over replications.
    pub contraction_modulus: f64,
    /// Mean fixed-point residual over replications (weak mode with diagnostics).
    pub fixed_point_residual: Option<f64>,
    pub replications: Vec<ReplicationSummary>,
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl PointSummary {
    fn collect(axis_value: Option<f64>, config: SimConfig, reps: Vec<ReplicationSummary>) -> Self {
        let means: Vec<f64> = reps.iter().map(|r| r.mean_system_throughput).collect();
        let (mean_throughput, std_error) = mean_and_se(&means);
        let iters: Vec<f64> = reps.iter().filter_map(|r| r.mean_iterations).collect();
        let residuals: Vec<f64> = reps
            .iter()
            .filter_map(|r| r.residual.as_ref().map(|x| x.max_residual))
            .collect();
        Self {
            axis_value,
            policy: config.policy,
            mean_throughput,
            std_error,
            mean_iterations: (!iters.is_empty()).then(|| mean_and_se(&iters).0),
            contraction_modulus: reps
                .iter()
                .map(|r| r.contraction.modulus)
                .fold(0.0, f64::max),
            fixed_point_residual: (!residuals.is_empty()).then(|| mean_and_se(&residuals).0),
            config,
            replications: reps,
        }
    }
}

/// Thread pool sized by [`WORKERS_ENV`], defaulting to one worker per
/// available processor.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let workers = match std::env::var(WORKERS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| {
            Error::config(WORKERS_ENV, format!("{v:?} is not a non-negative integer"))
        })?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(WORKERS_ENV, e.to_string()))
}

/// Runs every (sweep point, policy) pair for `base.replications`
/// replications. Results come back ordered by point, then by `policies`.
/// Replication `r` uses the same random streams at every point.
pub fn run_experiment(
    base: &SimConfig,
    policies: &[Policy],
    sweep: Option<&Sweep>,
) -> Result<Vec<PointSummary>> {
    if policies.is_empty() {
        return Err(Error::config("policy.policies", "no policy selected"));
    }
    let points: Vec<Option<f64>> = match sweep {
        Some(s) => s.values.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    };
    let mut configs = Vec::new();
    for &value in &points {
        for &policy in policies {
            let mut c = match (sweep, value) {
                (Some(s), Some(v)) => s.axis.apply(base, v)?,
                _ => {
                    base.validate()?;
                    base.clone()
                }
            };
            c.policy = policy;
            configs.push((value, c));
        }
    }
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|i| (0..base.replications as u64).map(move |r| (i, r)))
        .collect();
    let pool = worker_pool()?;
    let results: Vec<Result<ReplicationSummary>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, r)| run_replication(&configs[i].1, r))
            .collect()
    });
    let mut results = results.into_iter();
    let mut out = Vec::with_capacity(configs.len());
    for (value, config) in configs {
        let reps = results
            .by_ref()
            .take(config.replications)
            .collect::<Result<Vec<_>>>()?;
        out.push(PointSummary::collect(value, config, reps));
    }
    Ok(out)
}
