//! Direct feedback alignment training with the backward matrix-vector
//! products executed on a simulated microring-resonator weight bank.
//!
//! Layout, bottom up: [`linalg`] and [`rng`] are the numeric base; [`mrr`]
//! models a single ring and its quantized, noisy multiply; [`bank`] tiles
//! feedback products onto an `M × N` ring array; [`dfa`] trains networks
//! with any [`dfa::MvmExecutor`]; [`energy`] is the power and throughput
//! model; [`data`], [`checkpoint`], [`report`] and [`experiment`] handle
//! files and whole runs.

pub mod bank;
pub mod checkpoint;
pub mod data;
pub mod dfa;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod mrr;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
