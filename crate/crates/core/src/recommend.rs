//! Per-slot recommendation exchange and fusion.

use crate::channel::{ChannelParams, ChannelState};
use crate::error::{Error, Result};
use crate::topology::Graph;

/// What a user knows about one channel after the exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RecState {
    /// Recommended as idle (+1).
    Idle,
    /// Reported busy (-1).
    Busy,
    /// No report (0).
    Unknown,
}

impl RecState {
    pub const ALL: [RecState; 3] = [RecState::Idle, RecState::Busy, RecState::Unknown];

    pub fn signed(self) -> i8 {
        match self {
            RecState::Idle => 1,
            RecState::Busy => -1,
            RecState::Unknown => 0,
        }
    }

    pub fn from_signed(v: i8) -> Option<Self> {
        match v {
            1 => Some(RecState::Idle),
            -1 => Some(RecState::Busy),
            0 => Some(RecState::Unknown),
            _ => None,
        }
    }

    /// Dense index in `{+1, -1, 0}` order.
    pub fn index(self) -> usize {
        match self {
            RecState::Idle => 0,
            RecState::Busy => 1,
            RecState::Unknown => 2,
        }
    }
}

impl From<ChannelState> for RecState {
    fn from(s: ChannelState) -> Self {
        match s {
            ChannelState::Idle => RecState::Idle,
            ChannelState::Busy => RecState::Busy,
        }
    }
}

/// One user's sensing outcome: the channel it accessed and what it saw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SensingReport {
    pub user: usize,
    pub channel: usize,
    pub sensed: ChannelState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionRule {
    /// Any idle report makes the channel idle; any busy report makes it busy.
    #[default]
    Or,
    /// The strict majority of received reports wins; a tie leaves it unknown.
    Majority,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FusionOptions {
    pub rule: FusionRule,
    /// Fold the user's own sensing result into its state.
    pub include_own_report: bool,
}

impl Default for FusionOptions {
    fn default() -> Self {
        Self {
            rule: FusionRule::Or,
            include_own_report: true,
        }
    }
}

/// `rows[user][channel]`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecommendationState {
    pub rows: Vec<Vec<RecState>>,
}

impl RecommendationState {
    pub fn unknown(n_users: usize, n_channels: usize) -> Self {
        Self {
            rows: vec![vec![RecState::Unknown; n_channels]; n_users],
        }
    }

    pub fn row(&self, user: usize) -> &[RecState] {
        &self.rows[user]
    }
}

/// Fuses the slot's reports. `reports` must hold one entry per user, indexed
/// by user.
pub fn fuse_recommendations(
    reports: &[SensingReport],
    social: &Graph,
    n_channels: usize,
    options: FusionOptions,
) -> Result<RecommendationState> {
    let n = social.n();
    if reports.len() != n {
        return Err(Error::Consistency(format!(
            "{} reports for {n} users",
            reports.len()
        )));
    }
    for (k, r) in reports.iter().enumerate() {
        if r.user != k {
            return Err(Error::Consistency(format!("report {k} is from user {}", r.user)));
        }
        if r.channel >= n_channels {
            return Err(Error::OutOfRange {
                index: r.channel,
                len: n_channels,
            });
        }
    }

    let mut rows = Vec::with_capacity(n);
    let mut idle = vec![0u32; n_channels];
    let mut busy = vec![0u32; n_channels];
    for user in 0..n {
        idle.iter_mut().for_each(|c| *c = 0);
        busy.iter_mut().for_each(|c| *c = 0);
        let own = options.include_own_report.then_some(user);
        for &k in social.adjacent(user).iter().chain(own.iter()) {
            let r = &reports[k];
            match r.sensed {
                ChannelState::Idle => idle[r.channel] += 1,
                ChannelState::Busy => busy[r.channel] += 1,
            }
        }
        let row = (0..n_channels)
            .map(|m| match options.rule {
                FusionRule::Or => match (idle[m] > 0, busy[m] > 0) {
                    (true, true) => Err(Error::Consistency(format!(
                        "user {user} received both idle and busy reports for channel {m}"
                    ))),
                    (true, false) => Ok(RecState::Idle),
                    (false, true) => Ok(RecState::Busy),
                    (false, false) => Ok(RecState::Unknown),
                },
                FusionRule::Majority => Ok(match idle[m].cmp(&busy[m]) {
                    std::cmp::Ordering::Greater => RecState::Idle,
                    std::cmp::Ordering::Less => RecState::Busy,
                    std::cmp::Ordering::Equal => RecState::Unknown,
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(RecommendationState { rows })
}

/// Next-slot idle probability given this slot's recommendation state.
pub fn idle_probability_from_state(channel: &ChannelParams, state: RecState) -> f64 {
    match state {
        RecState::Idle => 1.0 - channel.mu(),
        RecState::Busy => channel.lambda(),
        RecState::Unknown => channel.stationary_idle_probability(),
    }
}
