use super::cell::{cell_step, GateVars};
use super::params::{Arch, ModelParams};
use crate::corpus::Chunk;
use crate::dropout::{apply_mask, MaskContext};
use crate::error::{Error, Result};
use crate::numerics::{Grads, Real, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct LayerState<F> {
    pub h: Tensor<F>,
    /// LSTM only.
    pub c: Option<Tensor<F>>,
}

/// Recurrent state carried between chunks as plain values.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenState<F> {
    pub layers: Vec<LayerState<F>>,
}

impl<F: Real> HiddenState<F> {
    pub fn zeros(arch: Arch, layers: usize, batch: usize, hidden: usize) -> Self {
        HiddenState {
            layers: (0..layers)
                .map(|_| LayerState {
                    h: Tensor::zeros(batch, hidden),
                    c: arch.has_cell().then(|| Tensor::zeros(batch, hidden)),
                })
                .collect(),
        }
    }

    pub fn for_model(model: &ModelParams<F>, batch: usize) -> Self {
        Self::zeros(model.arch, model.layers.len(), batch, model.hidden_dim)
    }

    pub fn batch(&self) -> usize {
        self.layers.first().map_or(0, |l| l.h.rows())
    }
}

/// Recurrent state as tape values.
#[derive(Clone, Debug)]
pub struct StateVars {
    pub h: Vec<Var>,
    pub c: Vec<Option<Var>>,
}

/// Places a carried state on the tape as constants: gradients stop here.
pub fn bind_state<F: Real>(tape: &mut Tape<F>, state: &HiddenState<F>) -> StateVars {
    StateVars {
        h: state.layers.iter().map(|l| tape.constant(l.h.clone())).collect(),
        c: state
            .layers
            .iter()
            .map(|l| l.c.as_ref().map(|c| tape.constant(c.clone())))
            .collect(),
    }
}

/// Copies the state values out of the tape, severing their gradient lineage.
pub fn detach_state<F: Real>(tape: &Tape<F>, vars: &StateVars) -> HiddenState<F> {
    HiddenState {
        layers: vars
            .h
            .iter()
            .zip(&vars.c)
            .map(|(&h, c)| LayerState {
                h: tape.value(h).clone(),
                c: c.map(|c| tape.value(c).clone()),
            })
            .collect(),
    }
}

/// Recurrent and decoder weights placed on a tape. Embedding rows are
/// placed per timestep by [`forward_chunk`] instead, so the full table is
/// never copied.
#[derive(Clone, Debug)]
pub struct BoundParams {
    pub layers: Vec<Vec<GateVars>>,
    pub decoder_w: Var,
    pub decoder_b: Var,
    trainable: bool,
}

impl BoundParams {
    pub fn bind<F: Real>(tape: &mut Tape<F>, model: &ModelParams<F>, trainable: bool) -> Self {
        let mut leaf = |t: &Tensor<F>| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        };
        let layers = model
            .layers
            .iter()
            .map(|l| {
                l.gates
                    .iter()
                    .map(|g| GateVars {
                        w: leaf(&g.w),
                        u: leaf(&g.u),
                        b: leaf(&g.b),
                    })
                    .collect()
            })
            .collect();
        BoundParams {
            layers,
            decoder_w: leaf(&model.decoder_w),
            decoder_b: leaf(&model.decoder_b),
            trainable,
        }
    }
}

pub struct ChunkOutput {
    /// `[width·batch, V]`, row `t·batch + b`.
    pub logits: Var,
    pub state: StateVars,
    /// Embedding rows looked up at each timestep with their ids.
    pub embedded: Vec<(Var, Vec<usize>)>,
}

fn embed<F: Real>(tape: &mut Tape<F>, model: &ModelParams<F>, ids: &[usize], trainable: bool) -> Result<Var> {
    let (v, e) = model.embedding.shape();
    let mut rows = Vec::with_capacity(ids.len() * e);
    for &id in ids {
        if id >= v {
            return Err(Error::TargetOutOfRange { target: id, vocab: v });
        }
        rows.extend_from_slice(model.embedding.row(id));
    }
    let t = Tensor::from_vec(ids.len(), e, rows)?;
    Ok(if trainable { tape.param(t) } else { tape.constant(t) })
}

/// Runs the model over one chunk: embed, mask the input, two recurrent
/// layers with hidden masks, mask the top output, then decode every
/// timestep at once. Without a mask context all masks are identity.
pub fn forward_chunk<F: Real>(
    tape: &mut Tape<F>,
    model: &ModelParams<F>,
    bound: &BoundParams,
    chunk: &Chunk,
    mut state: StateVars,
    mut masks: Option<&mut MaskContext<'_, F>>,
) -> Result<ChunkOutput> {
    let mut tops = Vec::with_capacity(chunk.width);
    let mut embedded = Vec::with_capacity(chunk.width);
    for t in 0..chunk.width {
        let ids = chunk.input_column(t);
        let step = match masks.as_deref_mut() {
            Some(ctx) => Some(ctx.step(tape, t)?),
            None => None,
        };
        let e = embed(tape, model, &ids, bound.trainable)?;
        embedded.push((e, ids));
        let mut x = match step.as_ref().and_then(|s| s.input) {
            Some(m) => apply_mask(tape, e, m)?,
            None => e,
        };
        for (l, gates) in bound.layers.iter().enumerate() {
            let hm = step.as_ref().and_then(|s| s.hidden.get(l).copied().flatten());
            let (h, c) = cell_step(tape, model.arch, gates, x, state.h[l], state.c[l], hm)?;
            state.h[l] = h;
            state.c[l] = c;
            x = h;
        }
        if let Some(m) = step.as_ref().and_then(|s| s.output) {
            x = apply_mask(tape, x, m)?;
        }
        tops.push(x);
    }
    let stacked = tape.concat_rows(&tops)?;
    let logits = tape.affine(stacked, bound.decoder_w, bound.decoder_b)?;
    Ok(ChunkOutput {
        logits,
        state,
        embedded,
    })
}

/// Parameter gradients in [`ModelParams::tensors`] order; embedding row
/// gradients are scatter-added into the table.
pub fn collect_grads<F: Real>(
    model: &ModelParams<F>,
    bound: &BoundParams,
    out: &ChunkOutput,
    grads: &mut Grads<F>,
) -> Result<Vec<Tensor<F>>> {
    let (v, e) = model.embedding.shape();
    let mut emb = Tensor::zeros(v, e);
    for (var, ids) in &out.embedded {
        if let Some(g) = grads.get(*var) {
            for (r, &id) in ids.iter().enumerate() {
                let dst = &mut emb.data_mut()[id * e..(id + 1) * e];
                for (d, &s) in dst.iter_mut().zip(g.row(r)) {
                    *d += s;
                }
            }
        }
    }
    let mut all = vec![emb];
    for (lp, lv) in model.layers.iter().zip(&bound.layers) {
        for (gp, gv) in lp.gates.iter().zip(lv) {
            all.push(grads.take_or_zeros(gv.w, gp.w.shape()));
            all.push(grads.take_or_zeros(gv.u, gp.u.shape()));
            all.push(grads.take_or_zeros(gv.b, gp.b.shape()));
        }
    }
    all.push(grads.take_or_zeros(bound.decoder_w, model.decoder_w.shape()));
    all.push(grads.take_or_zeros(bound.decoder_b, model.decoder_b.shape()));
    Ok(all)
}

/// Anything that yields next-token logits for a chunk while carrying state.
pub trait LanguageModel<F: Real> {
    type State: Clone;

    fn vocab_size(&self) -> usize;

    fn initial_state(&self, batch: usize) -> Self::State;

    /// Logits `[width·batch, V]` in time-major row order; `state` advances
    /// past the chunk.
    fn chunk_logits(&self, chunk: &Chunk, state: &mut Self::State) -> Result<Tensor<F>>;
}

impl<F: Real> LanguageModel<F> for ModelParams<F> {
    type State = HiddenState<F>;

    fn vocab_size(&self) -> usize {
        ModelParams::vocab_size(self)
    }

    fn initial_state(&self, batch: usize) -> HiddenState<F> {
        HiddenState::for_model(self, batch)
    }

    fn chunk_logits(&self, chunk: &Chunk, state: &mut HiddenState<F>) -> Result<Tensor<F>> {
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, self, false);
        let sv = bind_state(&mut tape, state);
        let out = forward_chunk(&mut tape, self, &bound, chunk, sv, None)?;
        *state = detach_state(&tape, &out.state);
        Ok(tape.value(out.logits).clone())
    }
}
