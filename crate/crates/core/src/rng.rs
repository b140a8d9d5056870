//! Deterministic random-stream derivation.
//!
//! Every stochastic component of a replication draws from its own ChaCha8
//! stream. Stream seeds are a pure function of (master seed, replication,
//! purpose), so changing how many draws one component makes never shifts
//! another component's sequence. Sweep points share streams for the same
//! replication index, which gives common random numbers across the sweep.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// What a substream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    ChannelEvolution,
    Fading,
    Contention,
    Policy,
    GraphGeneration,
    Assignment,
    /// Monte-Carlo diagnostics (operator estimates); never used by the slot loop.
    Diagnostics,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::ChannelEvolution => 1,
            Purpose::Fading => 2,
            Purpose::Contention => 3,
            Purpose::Policy => 4,
            Purpose::GraphGeneration => 5,
            Purpose::Assignment => 6,
            Purpose::Diagnostics => 7,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed plan for one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomStreamPlan {
    master_seed: u64,
    replication: u64,
}

impl RandomStreamPlan {
    pub fn new(master_seed: u64, replication: u64) -> Self {
        Self {
            master_seed,
            replication,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn replication(&self) -> u64 {
        self.replication
    }

    pub fn seed_for(&self, purpose: Purpose) -> u64 {
        let a = splitmix64(self.master_seed);
        let b = splitmix64(a ^ self.replication.wrapping_mul(0xD1B5_4A32_D192_ED03));
        splitmix64(b ^ purpose.tag().wrapping_mul(0x8CB9_2BA7_2F3D_8DD7))
    }

    pub fn stream(&self, purpose: Purpose) -> SimRng {
        SimRng::seed_from_u64(self.seed_for(purpose))
    }
}
