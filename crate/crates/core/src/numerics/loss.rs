use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Row-wise softmax with max subtraction.
pub fn softmax<F: Real>(logits: &Tensor<F>) -> Tensor<F> {
    let mut out = logits.clone();
    let cols = logits.cols();
    for row in out.data_mut().chunks_mut(cols.max(1)) {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let mut total = F::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v = *v / total;
        }
    }
    out
}

fn check_targets(vocab: usize, rows: usize, targets: &[usize]) -> Result<()> {
    if targets.len() != rows {
        return Err(Error::Shape {
            op: "softmax_xent",
            lhs: (rows, vocab),
            rhs: (targets.len(), 1),
        });
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= vocab) {
        return Err(Error::TargetOutOfRange { target: t, vocab });
    }
    Ok(())
}

/// Cross-entropy `-log softmax(logits)[i, targets[i]]` for every row.
pub fn per_token_losses<F: Real>(logits: &Tensor<F>, targets: &[usize]) -> Result<Vec<F>> {
    check_targets(logits.cols(), logits.rows(), targets)?;
    Ok(targets
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let row = logits.row(i);
            let max = row.iter().copied().fold(F::neg_infinity(), F::max);
            let lse = row.iter().map(|&v| (v - max).exp()).sum::<F>().ln() + max;
            lse - row[t]
        })
        .collect())
}

/// Mean cross-entropy over the batch and its gradient `(softmax - onehot) / b`.
pub fn softmax_xent<F: Real>(logits: &Tensor<F>, targets: &[usize]) -> Result<(F, Tensor<F>)> {
    let losses = per_token_losses(logits, targets)?;
    let b = F::of(targets.len() as f64);
    let loss = losses.iter().copied().sum::<F>() / b;
    let mut grad = softmax(logits);
    let cols = grad.cols();
    for (i, &t) in targets.iter().enumerate() {
        let row = &mut grad.data_mut()[i * cols..(i + 1) * cols];
        row[t] -= F::one();
        row.iter_mut().for_each(|v| *v = *v / b);
    }
    Ok((loss, grad))
}
