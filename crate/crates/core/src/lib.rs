//! Word-level recurrent language models with a family of dropout
//! regularizers: static (Bernoulli, Gaussian), learned (concrete relaxation
//! with a trainable rate) and scheduled (curriculum), each optionally with
//! masks held fixed across the timesteps of a sequence. Includes truncated-BPTT
//! training with annealed SGD and a per-timestep perplexity analyzer.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod dropout;
mod error;
pub mod nlm;
pub mod numerics;
pub mod trainer;

pub use error::{Error, Result};
