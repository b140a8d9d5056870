//! Immutable per-replication scenario and the physical part of a slot.

use rand::Rng;

use crate::channel::{sample_throughput, ChannelParams, ChannelStateVector, FadingModel};
use crate::recommend::{FusionOptions, SensingReport};
use crate::topology::{Topology, UserParams};

/// Everything that stays fixed for one replication.
#[derive(Debug, Clone)]
pub struct World {
    pub channels: Vec<ChannelParams>,
    pub users: Vec<UserParams>,
    pub contention: Vec<f64>,
    pub fading: FadingModel,
    pub topology: Topology,
    pub fusion: FusionOptions,
    /// Trace node IDs assigned to users when the social graph came from a trace.
    pub trace_ids: Option<Vec<u64>>,
}

impl World {
    pub fn new(
        channels: Vec<ChannelParams>,
        users: Vec<UserParams>,
        fading: FadingModel,
        topology: Topology,
        fusion: FusionOptions,
    ) -> Self {
        let contention = users.iter().map(UserParams::contention_prob).collect();
        Self {
            channels,
            users,
            contention,
            fading,
            topology,
            fusion,
            trace_ids: None,
        }
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }
}

/// How a user's slot ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// The chosen channel was occupied by its primary user.
    BusyChannel,
    /// The channel was idle but the user did not contend.
    NoContend,
    /// The user contended together with an interfering user on the same channel.
    Collision,
    Success,
}

impl Outcome {
    pub fn tag(self) -> &'static str {
        match self {
            Outcome::BusyChannel => "busy",
            Outcome::NoContend => "no-contend",
            Outcome::Collision => "collision",
            Outcome::Success => "success",
        }
    }
}

/// Sensing, contention and transmission for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub contended: Vec<bool>,
    pub outcomes: Vec<Outcome>,
    /// Mbps; positive only on success.
    pub throughput: Vec<f64>,
    pub reports: Vec<SensingReport>,
}

/// Plays stages one to three of a slot. Every user consumes exactly one
/// contention draw; each successful user consumes fading draws.
pub fn realize_slot<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    world: &World,
    states: &ChannelStateVector,
    choices: &[usize],
    contention_rng: &mut R1,
    fading_rng: &mut R2,
) -> Realization {
    let n = world.n_users();
    let contended: Vec<bool> = (0..n)
        .map(|k| {
            let u: f64 = contention_rng.random();
            states.states[choices[k]].is_idle() && u < world.contention[k]
        })
        .collect();
    let interference = &world.topology.interference;
    let mut outcomes = Vec::with_capacity(n);
    let mut throughput = Vec::with_capacity(n);
    for k in 0..n {
        let m = choices[k];
        let outcome = if !states.states[m].is_idle() {
            Outcome::BusyChannel
        } else if !contended[k] {
            Outcome::NoContend
        } else if interference
            .adjacent(k)
            .iter()
            .any(|&j| choices[j] == m && contended[j])
        {
            Outcome::Collision
        } else {
            Outcome::Success
        };
        throughput.push(if outcome == Outcome::Success {
            sample_throughput(&world.fading, k, m, fading_rng)
        } else {
            0.0
        });
        outcomes.push(outcome);
    }
    let reports = (0..n)
        .map(|k| SensingReport {
            user: k,
            channel: choices[k],
            sensed: states.states[choices[k]],
        })
        .collect();
    Realization {
        contended,
        outcomes,
        throughput,
        reports,
    }
}
