use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::corpus::Chunk;
use crate::error::Result;
use crate::nlm::LanguageModel;
use crate::numerics::{softmax, Real, Tensor};

/// Draws one id from the softmax of a `[1, V]` logit row.
pub fn sample_next<F: Real, R: Rng + ?Sized>(logits: &Tensor<F>, rng: &mut R) -> usize {
    let probs: Vec<f64> = softmax(logits).data().iter().map(|p| p.f64()).collect();
    WeightedIndex::new(&probs)
        .expect("softmax is a valid distribution")
        .sample(rng)
}

/// Feeds `seed` (nonempty), then samples `length` ids, feeding each back in.
pub fn generate<F: Real, M: LanguageModel<F>, R: Rng + ?Sized>(
    model: &M,
    seed: &[usize],
    length: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(length);
    if length == 0 {
        return Ok(out);
    }
    let mut state = model.initial_state(1);
    let logits = model.chunk_logits(&Chunk::single_row(seed.to_vec(), vec![]), &mut state)?;
    let v = logits.cols();
    let last = logits.rows() - 1;
    let mut row = Tensor::from_vec(1, v, logits.row(last).to_vec())?;
    loop {
        let next = sample_next(&row, rng);
        out.push(next);
        if out.len() == length {
            return Ok(out);
        }
        row = model.chunk_logits(&Chunk::single_row(vec![next], vec![]), &mut state)?;
    }
}
