//! Learnable sinc filterbank front-end, a small dual-path CNN voice activity
//! detector, and a pairwise ranking loss for training it, with everything
//! needed around them: WAV I/O, noise mixing, synthetic data, evaluation
//! metrics, a deterministic trainer and a checkpoint format.
//!
//! Start with the programs in `examples/`; the `sqdr` binary wraps the
//! [`cli`] functions.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod frontend;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod rng;
pub mod signal;
pub mod trainer;

pub use error::{Error, Result};
