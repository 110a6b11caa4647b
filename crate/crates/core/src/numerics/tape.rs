//! Reverse-mode gradient tape.
//!
//! A [`Tape`] records every primitive in application order; [`Tape::backward`]
//! walks the record in exact reverse and returns the accumulated gradient of
//! every leaf. A leaf used several times receives the sum of its per-use
//! contributions. Tapes are built fresh for each BPTT chunk: values carried
//! into the next chunk re-enter as constants, which is what truncates the
//! gradient.

use super::kernels::{matmul_a_bt_acc, matmul_acc, matmul_at_b_acc};
use super::loss::softmax;
use super::real::{sigmoid, softplus};
use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<F> {
    Leaf,
    Affine { x: Var, w: Var, b: Var },
    MatMul { a: Var, b: Var },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    MulRow { x: Var, row: Var },
    Sigmoid(Var),
    Tanh(Var),
    OneMinus(Var),
    Sum(Var),
    Gather { table: Var, ids: Vec<usize> },
    ConcatRows(Vec<Var>),
    SoftmaxXent { logits: Var, targets: Vec<usize> },
    ConcreteMask { logit: Var, noise: Tensor<F>, tau: F, eps: F },
    NegEntropy { logit: Var, weight: F },
}

#[derive(Debug)]
struct Node<F> {
    value: Tensor<F>,
    op: Op<F>,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape<F> {
    nodes: Vec<Node<F>>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Grads<F> {
    grads: Vec<Option<Tensor<F>>>,
}

impl<F: Real> Grads<F> {
    pub fn get(&self, v: Var) -> Option<&Tensor<F>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Removes the gradient of `v`; leaves that received no gradient yield
    /// zeros of `shape`.
    pub fn take_or_zeros(&mut self, v: Var, shape: (usize, usize)) -> Tensor<F> {
        self.grads[v.0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(shape.0, shape.1))
    }
}

fn shape_err(op: &'static str, lhs: (usize, usize), rhs: (usize, usize)) -> Error {
    Error::Shape { op, lhs, rhs }
}

/// Relaxed drop indicator for one uniform draw `u`.
pub fn concrete_relaxation<F: Real>(rate_logit: F, u: F, tau: F, eps: F) -> F {
    let p = sigmoid(rate_logit);
    let q = sigmoid(-rate_logit);
    let lp = (p + eps).ln() - (q + eps).ln();
    let lu = (u + eps).ln() - (F::one() - u + eps).ln();
    sigmoid((lp + lu) / tau)
}

impl<F: Real> Tape<F> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// A trainable leaf; receives a gradient.
    pub fn param(&mut self, value: Tensor<F>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives a gradient (inputs, sampled masks, carried state).
    pub fn constant(&mut self, value: Tensor<F>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// `x·W + bias`, with `bias` a `[1, m]` row.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.1 != ws.0 {
            return Err(shape_err("affine", xs, ws));
        }
        if bs != (1, ws.1) {
            return Err(shape_err("affine bias", (1, ws.1), bs));
        }
        let mut out = Tensor::zeros(xs.0, ws.1);
        let n = ws.1;
        let bias = self.value(b).data();
        for row in out.data_mut().chunks_mut(n.max(1)) {
            row.copy_from_slice(bias);
        }
        matmul_acc(
            self.value(x).data(),
            self.value(w).data(),
            out.data_mut(),
            xs.0,
            xs.1,
            n,
        );
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(out, Op::Affine { x, w, b }, needs))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (as_, bs) = (self.shape(a), self.shape(b));
        if as_.1 != bs.0 {
            return Err(shape_err("matmul", as_, bs));
        }
        let mut out = Tensor::zeros(as_.0, bs.1);
        matmul_acc(
            self.value(a).data(),
            self.value(b).data(),
            out.data_mut(),
            as_.0,
            as_.1,
            bs.1,
        );
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::MatMul { a, b }, needs))
    }

    fn zip_with(&self, op: &'static str, a: Var, b: Var, f: impl Fn(F, F) -> F) -> Result<Tensor<F>> {
        let (va, vb) = (self.value(a), self.value(b));
        va.check_same(op, vb)?;
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::from_vec(va.rows(), va.cols(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with("add", a, b, |x, y| x + y)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Add { a, b }, needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with("mul", a, b, |x, y| x * y)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Mul { a, b }, needs))
    }

    /// Elementwise product with a `[1, n]` row broadcast over every row of `x`.
    pub fn mul_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (xs, rs) = (self.shape(x), self.shape(row));
        if rs != (1, xs.1) {
            return Err(shape_err("mul_row", xs, rs));
        }
        let r = self.value(row).data().to_vec();
        let mut out = self.value(x).clone();
        for chunk in out.data_mut().chunks_mut(xs.1.max(1)) {
            chunk.iter_mut().zip(&r).for_each(|(v, &m)| *v *= m);
        }
        let needs = self.needs(x) || self.needs(row);
        Ok(self.push(out, Op::MulRow { x, row }, needs))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(sigmoid);
        let needs = self.needs(x);
        self.push(out, Op::Sigmoid(x), needs)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).map(F::tanh);
        let needs = self.needs(x);
        self.push(out, Op::Tanh(x), needs)
    }

    /// `1 - x`
    pub fn one_minus(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| F::one() - v);
        let needs = self.needs(x);
        self.push(out, Op::OneMinus(x), needs)
    }

    /// Sum of all elements, as a `[1, 1]` scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).sum());
        let needs = self.needs(x);
        self.push(out, Op::Sum(x), needs)
    }

    /// Row lookup: output row `i` is `table[ids[i]]`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (rows, cols) = self.shape(table);
        if let Some(&bad) = ids.iter().find(|&&i| i >= rows) {
            return Err(Error::TargetOutOfRange {
                target: bad,
                vocab: rows,
            });
        }
        let t = self.value(table);
        let mut data = Vec::with_capacity(ids.len() * cols);
        for &i in ids {
            data.extend_from_slice(t.row(i));
        }
        let out = Tensor::from_vec(ids.len(), cols, data)?;
        let needs = self.needs(table);
        Ok(self.push(
            out,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
            needs,
        ))
    }

    /// Stacks the rows of every input, in order.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts.first().map_or(0, |&p| self.shape(p).1);
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.1 != cols {
                return Err(shape_err("concat_rows", (rows, cols), s));
            }
            rows += s.0;
            data.extend_from_slice(self.value(p).data());
        }
        let out = Tensor::from_vec(rows, cols, data)?;
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), needs))
    }

    /// Mean softmax cross-entropy of `logits` against `targets`, as a scalar.
    pub fn softmax_xent(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let losses = super::loss::per_token_losses(self.value(logits), targets)?;
        let mean = losses.iter().copied().sum::<F>() / F::of(targets.len() as f64);
        let needs = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(mean),
            Op::SoftmaxXent {
                logits,
                targets: targets.to_vec(),
            },
            needs,
        ))
    }

    /// Concrete dropout mask `(1 - z̃) / (1 - p)` with `p = sigmoid(logit)` and
    /// one relaxed drop indicator `z̃` per element of `noise` (uniform draws).
    pub fn concrete_mask(&mut self, logit: Var, noise: Tensor<F>, tau: F, eps: F) -> Result<Var> {
        if self.shape(logit) != (1, 1) {
            return Err(shape_err("concrete_mask", self.shape(logit), (1, 1)));
        }
        let l = self.value(logit).item();
        let keep = sigmoid(-l);
        let out = noise.map(|u| (F::one() - concrete_relaxation(l, u, tau, eps)) / keep);
        let needs = self.needs(logit);
        Ok(self.push(
            out,
            Op::ConcreteMask {
                logit,
                noise,
                tau,
                eps,
            },
            needs,
        ))
    }

    /// `weight · (p ln p + (1 - p) ln(1 - p))` with `p = sigmoid(logit)`: the
    /// negative Bernoulli entropy of the rate, scaled.
    pub fn neg_entropy(&mut self, logit: Var, weight: F) -> Result<Var> {
        if self.shape(logit) != (1, 1) {
            return Err(shape_err("neg_entropy", self.shape(logit), (1, 1)));
        }
        let l = self.value(logit).item();
        let value = weight * neg_entropy_of_logit(l);
        let needs = self.needs(logit);
        Ok(self.push(Tensor::scalar(value), Op::NegEntropy { logit, weight }, needs))
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Grads<F>> {
        if self.shape(loss) != (1, 1) {
            return Err(shape_err("backward", self.shape(loss), (1, 1)));
        }
        let mut grads: Vec<Option<Tensor<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(F::one()));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) || !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }
        Ok(Grads { grads })
    }

    fn slot<'g>(&self, grads: &'g mut [Option<Tensor<F>>], v: Var) -> &'g mut Tensor<F> {
        let (r, c) = self.shape(v);
        grads[v.0].get_or_insert_with(|| Tensor::zeros(r, c))
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<F>>], v: Var, f: impl Fn(usize, F) -> F, g: &Tensor<F>) {
        if !self.needs(v) {
            return;
        }
        let slot = self.slot(grads, v);
        for (idx, (s, &gv)) in slot.data_mut().iter_mut().zip(g.data()).enumerate() {
            *s += f(idx, gv);
        }
    }

    fn propagate(&self, node: &Node<F>, g: &Tensor<F>, grads: &mut [Option<Tensor<F>>]) {
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Affine { x, w, b } => {
                self.matmul_backward(*x, *w, g, grads);
                if self.needs(*b) {
                    let slot = self.slot(grads, *b);
                    let n = slot.cols();
                    for row in g.data().chunks(n.max(1)) {
                        slot.data_mut().iter_mut().zip(row).for_each(|(s, &v)| *s += v);
                    }
                }
            }
            Op::MatMul { a, b } => self.matmul_backward(*a, *b, g, grads),
            Op::Add { a, b } => {
                self.accumulate(grads, *a, |_, gv| gv, g);
                self.accumulate(grads, *b, |_, gv| gv, g);
            }
            Op::Mul { a, b } => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, |i, gv| gv * vb[i], g);
                self.accumulate(grads, *b, |i, gv| gv * va[i], g);
            }
            Op::MulRow { x, row } => {
                let r = self.value(*row).data();
                let n = r.len();
                self.accumulate(grads, *x, |i, gv| gv * r[i % n], g);
                if self.needs(*row) {
                    let xv = self.value(*x).data();
                    let slot = self.slot(grads, *row);
                    for (i, &gv) in g.data().iter().enumerate() {
                        slot.data_mut()[i % n] += gv * xv[i];
                    }
                }
            }
            Op::Sigmoid(x) => {
                let yv = y.data();
                self.accumulate(grads, *x, |i, gv| gv * yv[i] * (F::one() - yv[i]), g);
            }
            Op::Tanh(x) => {
                let yv = y.data();
                self.accumulate(grads, *x, |i, gv| gv * (F::one() - yv[i] * yv[i]), g);
            }
            Op::OneMinus(x) => self.accumulate(grads, *x, |_, gv| -gv, g),
            Op::Sum(x) => {
                let s = g.item();
                if self.needs(*x) {
                    self.slot(grads, *x).data_mut().iter_mut().for_each(|v| *v += s);
                }
            }
            Op::Gather { table, ids } => {
                if self.needs(*table) {
                    let slot = self.slot(grads, *table);
                    let cols = slot.cols();
                    for (r, &id) in ids.iter().enumerate() {
                        let dst = &mut slot.data_mut()[id * cols..(id + 1) * cols];
                        dst.iter_mut().zip(g.row(r)).for_each(|(d, &v)| *d += v);
                    }
                }
            }
            Op::ConcatRows(parts) => {
                let cols = g.cols();
                let mut offset = 0;
                for &p in parts {
                    let rows = self.shape(p).0;
                    if self.needs(p) {
                        let src = &g.data()[offset * cols..(offset + rows) * cols];
                        let slot = self.slot(grads, p);
                        slot.data_mut().iter_mut().zip(src).for_each(|(s, &v)| *s += v);
                    }
                    offset += rows;
                }
            }
            Op::SoftmaxXent { logits, targets } => {
                if self.needs(*logits) {
                    let lv = self.value(*logits);
                    let mut d = softmax(lv);
                    let cols = d.cols();
                    let scale = g.item() / F::of(targets.len() as f64);
                    for (i, &t) in targets.iter().enumerate() {
                        d.data_mut()[i * cols + t] -= F::one();
                    }
                    d.scale(scale);
                    let slot = self.slot(grads, *logits);
                    slot.data_mut().iter_mut().zip(d.data()).for_each(|(s, &v)| *s += v);
                }
            }
            Op::ConcreteMask {
                logit,
                noise,
                tau,
                eps,
            } => {
                if self.needs(*logit) {
                    let l = self.value(*logit).item();
                    let (p, q) = (sigmoid(l), sigmoid(-l));
                    let one = F::one();
                    let dlp_dp = one / (p + *eps) + one / (q + *eps);
                    let mut dl = F::zero();
                    for (&u, &gv) in noise.data().iter().zip(g.data()) {
                        let z = concrete_relaxation(l, u, *tau, *eps);
                        let dz_dp = z * (one - z) * dlp_dp / *tau;
                        let dm_dp = -dz_dp / q + (one - z) / (q * q);
                        dl += gv * dm_dp;
                    }
                    self.slot(grads, *logit).data_mut()[0] += dl * p * q;
                }
            }
            Op::NegEntropy { logit, weight } => {
                if self.needs(*logit) {
                    let l = self.value(*logit).item();
                    // d/dl [p ln p + q ln q] = ln(p/q) · p q = l · p q
                    let d = *weight * l * sigmoid(l) * sigmoid(-l);
                    self.slot(grads, *logit).data_mut()[0] += g.item() * d;
                }
            }
        }
    }

    fn matmul_backward(&self, x: Var, w: Var, g: &Tensor<F>, grads: &mut [Option<Tensor<F>>]) {
        let (b, n) = self.shape(x);
        let m = self.shape(w).1;
        if self.needs(x) {
            let wv = self.value(w).data();
            let slot = self.slot(grads, x);
            matmul_a_bt_acc(g.data(), wv, slot.data_mut(), b, m, n);
        }
        if self.needs(w) {
            let xv = self.value(x).data();
            let slot = self.slot(grads, w);
            matmul_at_b_acc(xv, g.data(), slot.data_mut(), b, n, m);
        }
    }
}

/// `p ln p + (1-p) ln(1-p)` for `p = sigmoid(logit)`, stable for large |logit|.
pub fn neg_entropy_of_logit<F: Real>(logit: F) -> F {
    let (p, q) = (sigmoid(logit), sigmoid(-logit));
    // ln p = -softplus(-l), ln q = -softplus(l)
    -(p * softplus(-logit) + q * softplus(logit))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    type T = Tensor<f64>;

    /// Relative error between two gradient tensors, ‖a-b‖ / max(‖a‖, ‖b‖).
    fn rel_err(a: &T, b: &T) -> f64 {
        let diff: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum();
        let scale = a.norm_sq().sqrt().max(b.norm_sq().sqrt());
        if scale == 0.0 {
            diff.sqrt()
        } else {
            diff.sqrt() / scale
        }
    }

    /// Central differences of `f` with respect to every element of `inputs[k]`.
    fn numeric_grad(inputs: &[T], k: usize, f: &dyn Fn(&[T]) -> f64) -> T {
        let h = 1e-5;
        let mut out = T::zeros(inputs[k].rows(), inputs[k].cols());
        for idx in 0..inputs[k].len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[idx] += h;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[idx] -= h;
            out.data_mut()[idx] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
        out
    }

    /// Builds `build` on a fresh tape with every input a param, and checks
    /// the analytic gradient of the scalar output against finite differences.
    fn check(inputs: Vec<T>, build: impl Fn(&mut Tape<f64>, &[Var]) -> Var) {
        let eval = |xs: &[T]| {
            let mut tape = Tape::new();
            let vars: Vec<Var> = xs.iter().map(|x| tape.param(x.clone())).collect();
            let out = build(&mut tape, &vars);
            tape.value(out).item()
        };
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|x| tape.param(x.clone())).collect();
        let out = build(&mut tape, &vars);
        let grads = tape.backward(out).unwrap();
        for k in 0..inputs.len() {
            let analytic = grads
                .get(vars[k])
                .cloned()
                .unwrap_or_else(|| T::zeros(inputs[k].rows(), inputs[k].cols()));
            let numeric = numeric_grad(&inputs, k, &eval);
            let err = rel_err(&analytic, &numeric);
            assert!(err < 1e-6, "input {k}: relative error {err}");
        }
    }

    fn rand_t(r: usize, c: usize, rng: &mut ChaCha8Rng) -> T {
        T::uniform(r, c, -1.0, 1.0, rng)
    }

    #[test]
    fn affine_examples() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(T::from_rows(&[&[1.0, 2.0]]));
        let w = tape.constant(T::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]));
        let b = tape.constant(T::from_rows(&[&[0.0, 0.0]]));
        let y = tape.affine(x, w, b).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 2.0]);

        let x = tape.constant(T::from_rows(&[&[1.0, 1.0]]));
        let w = tape.constant(T::from_rows(&[&[2.0], &[3.0]]));
        let b = tape.constant(T::from_rows(&[&[1.0]]));
        let y = tape.affine(x, w, b).unwrap();
        assert_eq!(tape.value(y).data(), &[6.0]);
    }

    #[test]
    fn affine_shape_error_names_both_shapes() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(T::zeros(2, 3));
        let w = tape.constant(T::zeros(4, 2));
        let b = tape.constant(T::zeros(1, 2));
        let err = tape.affine(x, w, b).unwrap_err();
        assert!(err.to_string().contains("(2, 3)") && err.to_string().contains("(4, 2)"));
    }

    #[test]
    fn pointwise_values() {
        let mut tape = Tape::<f64>::new();
        let z = tape.constant(T::zeros(1, 1));
        let s = tape.sigmoid(z);
        let t = tape.tanh(z);
        assert_eq!(tape.value(s).item(), 0.5);
        assert_eq!(tape.value(t).item(), 0.0);
    }

    #[test]
    fn affine_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inputs = vec![rand_t(3, 4, &mut rng), rand_t(4, 5, &mut rng), rand_t(1, 5, &mut rng)];
        check(inputs, |t, v| {
            let y = t.affine(v[0], v[1], v[2]).unwrap();
            t.sum(y)
        });
    }

    #[test]
    fn pointwise_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inputs = vec![rand_t(2, 3, &mut rng), rand_t(2, 3, &mut rng), rand_t(1, 3, &mut rng)];
        check(inputs, |t, v| {
            let s = t.sigmoid(v[0]);
            let h = t.tanh(v[1]);
            let m = t.mul(s, h).unwrap();
            let a = t.add(m, v[0]).unwrap();
            let o = t.one_minus(a);
            let r = t.mul_row(o, v[2]).unwrap();
            let sq = t.mul(r, r).unwrap();
            t.sum(sq)
        });
    }

    #[test]
    fn gather_concat_xent_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inputs = vec![rand_t(6, 3, &mut rng), rand_t(3, 6, &mut rng)];
        check(inputs, |t, v| {
            let a = t.gather(v[0], &[1, 4, 1]).unwrap();
            let b = t.gather(v[0], &[0, 5]).unwrap();
            let rows = t.concat_rows(&[a, b]).unwrap();
            let logits = t.matmul(rows, v[1]).unwrap();
            t.softmax_xent(logits, &[0, 5, 2, 2, 3]).unwrap()
        });
    }

    #[test]
    fn parameter_used_twice_sums_contributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = rand_t(3, 3, &mut rng);
        let x = rand_t(2, 3, &mut rng);

        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let wv = tape.param(w.clone());
        let h1 = tape.matmul(xv, wv).unwrap();
        let h2 = tape.matmul(h1, wv).unwrap();
        let loss = tape.sum(h2);
        let g = tape.backward(loss).unwrap().get(wv).unwrap().clone();

        // same graph with two independent copies of w
        let mut tape = Tape::new();
        let xv = tape.constant(x);
        let w1 = tape.param(w.clone());
        let w2 = tape.param(w);
        let h1 = tape.matmul(xv, w1).unwrap();
        let h2 = tape.matmul(h1, w2).unwrap();
        let loss = tape.sum(h2);
        let grads = tape.backward(loss).unwrap();
        let mut sum = grads.get(w1).unwrap().clone();
        sum.add_assign(grads.get(w2).unwrap()).unwrap();
        assert!(rel_err(&g, &sum) < 1e-14);
    }

    #[test]
    fn concrete_and_entropy_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let noise = T::uniform(2, 4, 0.0, 1.0, &mut rng);
        let x = rand_t(2, 4, &mut rng);
        for l in [-2.0, 0.3, 2.944] {
            let noise = noise.clone();
            let x = x.clone();
            check(vec![T::scalar(l)], move |t, v| {
                let m = t.concrete_mask(v[0], noise.clone(), 0.1, 1e-6).unwrap();
                let xv = t.constant(x.clone());
                let y = t.mul(xv, m).unwrap();
                let s = t.sum(y);
                let r = t.neg_entropy(v[0], 0.7).unwrap();
                t.add(s, r).unwrap()
            });
        }
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::<f64>::new();
        let c = tape.constant(T::ones(1, 2));
        let p = tape.param(T::ones(1, 2));
        let m = tape.mul(c, p).unwrap();
        let s = tape.sum(m);
        let g = tape.backward(s).unwrap();
        assert!(g.get(c).is_none());
        assert_eq!(g.get(p).unwrap().data(), &[1.0, 1.0]);
    }
}
