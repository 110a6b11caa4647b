//! Per-timestep perplexity over fixed-length windows of a test stream, and
//! free-running generation by multinomial sampling.

mod generate;
mod stats;

pub use generate::{generate, sample_next};
pub use stats::{per_step_stats, PerStepStats, StepRow};
