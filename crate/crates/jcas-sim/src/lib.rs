//! Multi-UAV joint communication and sensing mission simulator.

pub mod config;
pub mod energy;
pub mod env;
pub mod error;
pub mod harness;
pub mod knowledge;
pub mod metrics;
pub mod phy;
pub mod policy;
pub mod rng;
pub mod world;
