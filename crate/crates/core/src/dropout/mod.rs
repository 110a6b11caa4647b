//! Dropout regularizers for recurrent language models: static Bernoulli and
//! Gaussian masks, a concrete relaxation with a learned rate, curriculum
//! schedules, and the mask lifecycle that holds masks fixed across the
//! timesteps of a sequence.

pub mod concrete;
mod masks;
pub mod sampler;
pub mod schedule;
mod spec;

pub use concrete::{concrete_regularizer, ConcreteRate, SiteRates};
pub use masks::{
    apply_mask, refresh_masks, MaskContext, MaskDraw, MaskDraws, MaskShapes, MaskState,
    RateVars, StepMasks,
};
pub use sampler::{
    gaussian_alpha, sample_bernoulli_mask, sample_concrete_mask, sample_gaussian_mask,
};
pub use schedule::{schedule_value, ScheduleKind, ScheduleState};
pub use spec::{DropoutSpec, RateSource, Site, Variant};
