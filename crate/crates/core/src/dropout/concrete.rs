use serde::{Deserialize, Serialize};

use crate::numerics::tape::neg_entropy_of_logit;
use crate::numerics::{sigmoid, Real};

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// A learned dropout rate `p = sigmoid(logit)`; the logit is a trainable
/// parameter updated by SGD alongside the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcreteRate<F> {
    pub logit: F,
    pub reg_weight: f64,
}

impl<F: Real> ConcreteRate<F> {
    pub fn from_rate(p: f64, reg_weight: f64) -> Self {
        ConcreteRate {
            logit: F::of(logit(p)),
            reg_weight,
        }
    }

    pub fn rate(&self) -> f64 {
        sigmoid(self.logit).f64()
    }
}

/// `λ · units · (p ln p + (1-p) ln(1-p))`: the negative entropy of the rate,
/// added to the training loss. It is never positive, vanishes as `p → 0` or
/// `p → 1`, and is stationary at `p = ½`.
pub fn concrete_regularizer<F: Real>(rate: &ConcreteRate<F>, unit_count: usize) -> f64 {
    rate.reg_weight * unit_count as f64 * neg_entropy_of_logit(rate.logit.f64())
}

/// Learned rates for each masked site; `None` where the site is inactive.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SiteRates<F> {
    pub input: Option<ConcreteRate<F>>,
    pub hidden: Option<ConcreteRate<F>>,
    pub output: Option<ConcreteRate<F>>,
}

impl<F: Real> SiteRates<F> {
    pub fn iter(&self) -> impl Iterator<Item = &ConcreteRate<F>> {
        [&self.input, &self.hidden, &self.output]
            .into_iter()
            .flatten()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut ConcreteRate<F>> {
        [&mut self.input, &mut self.hidden, &mut self.output]
            .into_iter()
            .flatten()
    }

    /// Mean rate over active sites, `None` when nothing is learned.
    pub fn mean_rate(&self) -> Option<f64> {
        let rates: Vec<f64> = self.iter().map(ConcreteRate::rate).collect();
        (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
    }
}
