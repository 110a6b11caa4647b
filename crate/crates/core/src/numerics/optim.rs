use super::{Real, Tensor};

/// Global L2 norm over every gradient tensor.
pub fn global_norm<F: Real>(grads: &[Tensor<F>]) -> f64 {
    grads
        .iter()
        .map(|g| g.data().iter().map(|&v| v.f64() * v.f64()).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Rescales all gradients so their joint norm is at most `max_norm`.
/// Returns the scale applied (1.0 when the norm was already small enough).
pub fn clip_global_norm<F: Real>(grads: &mut [Tensor<F>], max_norm: f64) -> f64 {
    debug_assert!(max_norm > 0.0);
    let norm = global_norm(grads);
    if norm > max_norm {
        let scale = max_norm / norm;
        let s = F::of(scale);
        grads.iter_mut().for_each(|g| g.scale(s));
        scale
    } else {
        1.0
    }
}

/// Plain SGD: `p -= lr * g` elementwise.
pub fn sgd_step<F: Real>(params: &mut [&mut Tensor<F>], grads: &[Tensor<F>], lr: f64) {
    debug_assert_eq!(params.len(), grads.len());
    let lr = F::of(lr);
    for (p, g) in params.iter_mut().zip(grads) {
        debug_assert_eq!(p.shape(), g.shape());
        p.data_mut()
            .iter_mut()
            .zip(g.data())
            .for_each(|(p, &g)| *p -= lr * g);
    }
}
