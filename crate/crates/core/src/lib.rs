//! Bit-exact software model of a time-multiplexed STDP learning engine whose
//! exponential decays use a stochastic low-bitwidth update.

pub mod config;
pub mod decay;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod io;
pub mod rng;
pub mod stdp;

pub use error::{Error, Result};
