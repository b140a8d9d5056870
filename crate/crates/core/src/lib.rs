//! Simulation library for recommendation-aided distributed spectrum access
//! among cognitive-radio users.

pub mod baselines;
pub mod channel;
pub mod cli;
pub mod engine;
pub mod error;
pub mod game;
pub mod learn;
pub mod oracle;
pub mod recommend;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};
