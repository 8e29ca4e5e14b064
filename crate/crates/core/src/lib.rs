//! Single-neuron gradient-flow theory and an iterative pruning laboratory
//! comparing learning-rate rewinding (LRR) with iterative magnitude pruning
//! and weight rewinding (IMP/WR).

pub mod analytics;
pub mod error;
pub mod fsio;
pub mod harness;
pub mod network;
pub mod neuron;
pub mod numerics;
pub mod pruning;

pub use error::{Error, Result};
