//! Periodic EXP4 for adversarial bandits whose best arm follows a periodic
//! pattern, together with offline regret comparators and a multi-device
//! wireless network selection simulator.

pub mod error;
pub mod experiment;
pub mod logspace;
pub mod netsim;
pub mod partitions;
pub mod policies;
pub mod regret;
pub mod scenario;
pub mod seeds;

pub use error::{Error, Result};
