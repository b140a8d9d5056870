//! Primary-channel occupancy and per-user fading throughput.
//!
//! Each channel is an independent two-state Markov chain. `lambda` is the
//! busy→idle transition probability and `mu` the idle→busy one, both per
//! slot. Channel indices are 0-based throughout the crate.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelState {
    Busy,
    Idle,
}

impl ChannelState {
    /// The signed encoding used in reports: busy = -1, idle = +1.
    pub fn signed(self) -> i8 {
        match self {
            ChannelState::Busy => -1,
            ChannelState::Idle => 1,
        }
    }

    pub fn is_idle(self) -> bool {
        self == ChannelState::Idle
    }
}

/// Transition probabilities of one channel. Both lie strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    lambda: f64,
    mu: f64,
}

impl ChannelParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        check_interior("lambda", lambda)?;
        check_interior("mu", mu)?;
        Ok(Self { lambda, mu })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Long-run fraction of idle slots, `lambda / (lambda + mu)`.
    pub fn stationary_idle_probability(&self) -> f64 {
        self.lambda / (self.lambda + self.mu)
    }
}

fn check_interior(key: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 || value > 1.0 {
        return Err(Error::config(key, format!("{value} is not a probability")));
    }
    if value == 0.0 || value == 1.0 {
        return Err(Error::config(
            key,
            format!("boundary transition probability {value}; must lie strictly inside (0, 1)"),
        ));
    }
    Ok(())
}

pub fn stationary_idle_probability(params: &ChannelParams) -> f64 {
    params.stationary_idle_probability()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelStateVector {
    pub states: Vec<ChannelState>,
    pub slot: u64,
}

impl ChannelStateVector {
    /// Draws slot-0 states from each channel's stationary distribution.
    pub fn stationary<R: Rng + ?Sized>(params: &[ChannelParams], rng: &mut R) -> Self {
        let states = params
            .iter()
            .map(|p| {
                if rng.random::<f64>() < p.stationary_idle_probability() {
                    ChannelState::Idle
                } else {
                    ChannelState::Busy
                }
            })
            .collect();
        Self { states, slot: 0 }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Advances every channel one slot. Exactly one uniform draw per channel.
pub fn step_channels<R: Rng + ?Sized>(
    params: &[ChannelParams],
    current: &ChannelStateVector,
    rng: &mut R,
) -> Result<ChannelStateVector> {
    if params.len() != current.states.len() {
        return Err(Error::config(
            "channels",
            format!(
                "{} channel parameter sets for {} channel states",
                params.len(),
                current.states.len()
            ),
        ));
    }
    let states = params
        .iter()
        .zip(&current.states)
        .map(|(p, s)| {
            let u: f64 = rng.random();
            match s {
                ChannelState::Busy if u < p.lambda => ChannelState::Idle,
                ChannelState::Idle if u < p.mu => ChannelState::Busy,
                other => *other,
            }
        })
        .collect();
    Ok(ChannelStateVector {
        states,
        slot: current.slot + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingKind {
    /// Rayleigh fading: the rate on an idle channel is exponential with the given mean.
    Exponential,
    /// Deterministic rate equal to the mean.
    Constant,
}

/// Per-user, per-channel mean throughputs `means[user][channel]` in Mbps.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingModel {
    kind: FadingKind,
    means: Vec<Vec<f64>>,
}

impl FadingModel {
    pub fn new(kind: FadingKind, means: Vec<Vec<f64>>) -> Result<Self> {
        for (n, row) in means.iter().enumerate() {
            for (m, &b) in row.iter().enumerate() {
                if !(b.is_finite() && b > 0.0) {
                    return Err(Error::config(
                        "users.throughput_means",
                        format!("mean throughput of user {n} on channel {m} is {b}; must be > 0"),
                    ));
                }
            }
        }
        Ok(Self { kind, means })
    }

    pub fn kind(&self) -> FadingKind {
        self.kind
    }

    pub fn mean(&self, user: usize, channel: usize) -> f64 {
        self.means[user][channel]
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn max_mean(&self) -> f64 {
        self.means
            .iter()
            .flatten()
            .copied()
            .fold(0.0, f64::max)
    }
}

pub fn sample_throughput<R: Rng + ?Sized>(
    fading: &FadingModel,
    user: usize,
    channel: usize,
    rng: &mut R,
) -> f64 {
    let mean = fading.mean(user, channel);
    match fading.kind {
        FadingKind::Constant => mean,
        FadingKind::Exponential => Exp::new(1.0 / mean)
            .expect("positive mean gives a valid rate")
            .sample(rng),
    }
}
