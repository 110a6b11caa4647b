use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::tape::concrete_relaxation;
use crate::numerics::{Real, Tensor};

fn check_rate(p_d: f64) -> Result<()> {
    if (0.0..1.0).contains(&p_d) {
        Ok(())
    } else {
        Err(Error::InvalidRate(p_d))
    }
}

/// Inverted Bernoulli mask: each element is 0 with probability `p_d`, else
/// `1 / (1 - p_d)`, so the mask has unit mean.
pub fn sample_bernoulli_mask<F: Real, R: Rng + ?Sized>(
    p_d: f64,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<Tensor<F>> {
    check_rate(p_d)?;
    if p_d == 0.0 {
        return Ok(Tensor::ones(rows, cols));
    }
    let keep = F::of(1.0 / (1.0 - p_d));
    let data = (0..rows * cols)
        .map(|_| if rng.random::<f64>() < p_d { F::zero() } else { keep })
        .collect();
    Tensor::from_vec(rows, cols, data)
}

/// Multiplicative Gaussian mask `1 + sqrt(α)·ε`, `ε ~ N(0, 1)`, `α = p/(1-p)`.
pub fn sample_gaussian_mask<F: Real, R: Rng + ?Sized>(
    p_d: f64,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<Tensor<F>> {
    check_rate(p_d)?;
    let alpha = gaussian_alpha(p_d);
    if alpha == 0.0 {
        return Ok(Tensor::ones(rows, cols));
    }
    let sd = alpha.sqrt();
    let data = (0..rows * cols)
        .map(|_| {
            let e: f64 = StandardNormal.sample(rng);
            F::of(1.0 + sd * e)
        })
        .collect();
    Tensor::from_vec(rows, cols, data)
}

pub fn gaussian_alpha(p_d: f64) -> f64 {
    p_d / (1.0 - p_d)
}

/// Uniform draws in `[0, 1)` that drive a concrete mask.
pub fn sample_uniform_noise<F: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor<F> {
    let data = (0..rows * cols).map(|_| F::of(rng.random::<f64>())).collect();
    Tensor::from_vec(rows, cols, data).expect("length matches shape")
}

/// Relaxed drop indicators `z̃` for given uniform draws.
pub fn concrete_indicators<F: Real>(rate_logit: F, noise: &Tensor<F>, tau: F, eps: F) -> Tensor<F> {
    noise.map(|u| concrete_relaxation(rate_logit, u, tau, eps))
}

/// Concrete mask values `(1 - z̃) / (1 - p)` outside any tape.
pub fn sample_concrete_mask<F: Real, R: Rng + ?Sized>(
    rate_logit: F,
    rows: usize,
    cols: usize,
    tau: F,
    eps: F,
    rng: &mut R,
) -> Tensor<F> {
    let noise = sample_uniform_noise::<F, R>(rows, cols, rng);
    let keep = crate::numerics::sigmoid(-rate_logit);
    concrete_indicators(rate_logit, &noise, tau, eps).map(|z| (F::one() - z) / keep)
}
