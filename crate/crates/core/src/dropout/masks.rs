use rand::RngCore;

use super::concrete::SiteRates;
use super::sampler::{sample_bernoulli_mask, sample_gaussian_mask, sample_uniform_noise};
use super::spec::{DropoutSpec, Site, Variant};
use crate::error::{Error, Result};
use crate::numerics::{Real, Tape, Tensor, Var};

/// Activation widths the masks must match.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaskShapes {
    pub batch: usize,
    pub input: usize,
    pub hidden: usize,
    pub layers: usize,
}

/// A sampled mask before it is placed on a tape.
#[derive(Clone, Debug, PartialEq)]
pub enum MaskDraw<F> {
    /// Fixed multiplicative values (Bernoulli or Gaussian).
    Scale(Tensor<F>),
    /// Uniform draws for a concrete mask; the mask itself depends on the
    /// learned rate and is built on the tape.
    Noise(Tensor<F>),
}

impl<F> MaskDraw<F> {
    pub fn tensor(&self) -> &Tensor<F> {
        match self {
            MaskDraw::Scale(t) | MaskDraw::Noise(t) => t,
        }
    }
}

/// Current masks per site (and per layer for the hidden site).
#[derive(Clone, Debug, PartialEq)]
pub struct MaskDraws<F> {
    pub input: Option<MaskDraw<F>>,
    pub hidden: Vec<Option<MaskDraw<F>>>,
    pub output: Option<MaskDraw<F>>,
}

impl<F> MaskDraws<F> {
    pub fn empty(layers: usize) -> Self {
        MaskDraws {
            input: None,
            hidden: (0..layers).map(|_| None).collect(),
            output: None,
        }
    }

    fn is_empty(&self) -> bool {
        self.input.is_none() && self.output.is_none() && self.hidden.iter().all(Option::is_none)
    }
}

#[derive(Clone, Debug)]
pub struct MaskState<F> {
    pub draws: MaskDraws<F>,
    /// Effective rate of the fixed and scheduled variants this epoch.
    pub epoch_rate: f64,
    /// Outside training every mask is the identity.
    pub training: bool,
    /// Pinned draws are never resampled.
    pub pinned: bool,
    shapes: Option<MaskShapes>,
}

impl<F: Real> MaskState<F> {
    pub fn new(epoch_rate: f64) -> Self {
        MaskState {
            draws: MaskDraws::empty(0),
            epoch_rate,
            training: true,
            pinned: false,
            shapes: None,
        }
    }

    /// Training-mode state that applies `draws` at every timestep.
    pub fn pinned(draws: MaskDraws<F>) -> Self {
        MaskState {
            draws,
            epoch_rate: 0.0,
            training: true,
            pinned: true,
            shapes: None,
        }
    }

    pub fn eval() -> Self {
        MaskState {
            training: false,
            ..Self::new(0.0)
        }
    }
}

fn draw<F: Real>(
    spec: &DropoutSpec,
    rate: f64,
    rows: usize,
    cols: usize,
    rng: &mut dyn RngCore,
) -> Result<MaskDraw<F>> {
    Ok(match spec.variant {
        Variant::Gaussian => MaskDraw::Scale(sample_gaussian_mask(rate, rows, cols, rng)?),
        Variant::Concrete => MaskDraw::Noise(sample_uniform_noise(rows, cols, rng)),
        _ => MaskDraw::Scale(sample_bernoulli_mask(rate, rows, cols, rng)?),
    })
}

/// Resamples the masks when the lifecycle calls for it: time-fixed variants
/// at every sequence (chunk) boundary, the others at every timestep. Returns
/// whether a new draw was made. Outside training, or with no dropout, all
/// masks are cleared (identity).
pub fn refresh_masks<F: Real>(
    spec: &DropoutSpec,
    state: &mut MaskState<F>,
    shapes: MaskShapes,
    timestep_boundary: bool,
    sequence_boundary: bool,
    rng: &mut dyn RngCore,
) -> Result<bool> {
    if !state.training || !spec.is_active() {
        if !state.draws.is_empty() {
            state.draws = MaskDraws::empty(shapes.layers);
        }
        return Ok(false);
    }
    if state.pinned {
        return Ok(false);
    }
    let due = if spec.time_fixed() {
        sequence_boundary
    } else {
        timestep_boundary
    };
    if !due && state.shapes == Some(shapes) {
        return Ok(false);
    }

    let rate = state.epoch_rate;
    let (b, e, h) = (shapes.batch, shapes.input, shapes.hidden);
    let mut draws = MaskDraws::empty(shapes.layers);
    if spec.site.covers(Site::Input) {
        draws.input = Some(draw(spec, rate, b, e, rng)?);
    }
    if spec.site.covers(Site::Hidden) {
        for slot in draws.hidden.iter_mut() {
            *slot = Some(draw(spec, rate, b, h, rng)?);
        }
    }
    if spec.site.covers(Site::Output) {
        draws.output = Some(draw(spec, rate, b, h, rng)?);
    }
    state.draws = draws;
    state.shapes = Some(shapes);
    Ok(true)
}

/// Multiplies `activation` by `mask`; the mask is either the same shape or a
/// `[1, n]` row shared by every batch row.
pub fn apply_mask<F: Real>(tape: &mut Tape<F>, activation: Var, mask: Var) -> Result<Var> {
    let (a, m) = (tape.value(activation).shape(), tape.value(mask).shape());
    if a == m {
        tape.mul(activation, mask)
    } else if m == (1, a.1) {
        tape.mul_row(activation, mask)
    } else {
        Err(Error::Shape {
            op: "apply_mask",
            lhs: a,
            rhs: m,
        })
    }
}

/// Mask handles for one timestep; `None` means identity.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepMasks {
    pub input: Option<Var>,
    pub hidden: Vec<Option<Var>>,
    pub output: Option<Var>,
}

/// Learned-rate logits registered on the current tape.
#[derive(Clone, Copy, Debug, Default)]
pub struct RateVars {
    pub input: Option<Var>,
    pub hidden: Option<Var>,
    pub output: Option<Var>,
}

impl RateVars {
    pub fn register<F: Real>(tape: &mut Tape<F>, rates: &SiteRates<F>) -> Self {
        let mut reg = |r: &Option<super::ConcreteRate<F>>| r.map(|r| tape.param(Tensor::scalar(r.logit)));
        RateVars {
            input: reg(&rates.input),
            hidden: reg(&rates.hidden),
            output: reg(&rates.output),
        }
    }
}

/// Drives the mask lifecycle during one chunk's forward pass and places the
/// masks on the tape. A mask drawn once is materialized once, so every
/// timestep that reuses it multiplies by the very same tape value.
pub struct MaskContext<'a, F> {
    spec: &'a DropoutSpec,
    state: &'a mut MaskState<F>,
    rng: &'a mut dyn RngCore,
    shapes: MaskShapes,
    rates: RateVars,
    cached: Option<StepMasks>,
}

impl<'a, F: Real> MaskContext<'a, F> {
    pub fn new(
        spec: &'a DropoutSpec,
        state: &'a mut MaskState<F>,
        rng: &'a mut dyn RngCore,
        shapes: MaskShapes,
        rates: RateVars,
    ) -> Self {
        MaskContext {
            spec,
            state,
            rng,
            shapes,
            rates,
            cached: None,
        }
    }

    pub fn spec(&self) -> &DropoutSpec {
        self.spec
    }

    /// Masks for timestep `t` of the chunk (`t = 0` is the sequence boundary).
    pub fn step(&mut self, tape: &mut Tape<F>, t: usize) -> Result<StepMasks> {
        let fresh = refresh_masks(self.spec, self.state, self.shapes, true, t == 0, self.rng)?;
        if fresh || self.cached.is_none() {
            self.cached = Some(self.materialize(tape)?);
        }
        Ok(self.cached.clone().unwrap_or_default())
    }

    fn materialize(&self, tape: &mut Tape<F>) -> Result<StepMasks> {
        let tau = F::of(self.spec.tau);
        let eps = F::of(self.spec.eps);
        let mut place = |d: &Option<MaskDraw<F>>, rate: Option<Var>| -> Result<Option<Var>> {
            match d {
                None => Ok(None),
                Some(MaskDraw::Scale(m)) => Ok(Some(tape.constant(m.clone()))),
                Some(MaskDraw::Noise(u)) => {
                    let logit = rate.ok_or_else(|| {
                        Error::config("dropout.variant", "concrete mask without a learned rate")
                    })?;
                    tape.concrete_mask(logit, u.clone(), tau, eps).map(Some)
                }
            }
        };
        let draws = &self.state.draws;
        let input = place(&draws.input, self.rates.input)?;
        let hidden = draws
            .hidden
            .iter()
            .map(|d| place(d, self.rates.hidden))
            .collect::<Result<Vec<_>>>()?;
        let output = place(&draws.output, self.rates.output)?;
        Ok(StepMasks {
            input,
            hidden,
            output,
        })
    }
}
