#![allow(dead_code)]

use droplm::corpus::synthetic::SyntheticSource;
use droplm::corpus::Chunk;
use droplm::dropout::{
    ConcreteRate, DropoutSpec, MaskContext, MaskShapes, MaskState, RateVars, Site, SiteRates, Variant,
};
use droplm::nlm::{bind_state, collect_grads, forward_chunk, Arch, BoundParams, HiddenState, LanguageModel, ModelParams};
use droplm::numerics::{Tape, Tensor, Var};
use droplm::trainer::{Corpora, TrainConfig};
use droplm::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type T = Tensor<f64>;

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-5;

/// ‖a - b‖ / max(‖a‖, ‖b‖); absolute when both vanish.
pub fn rel_err(a: &T, b: &T) -> f64 {
    let diff: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum();
    let scale = a.norm_sq().sqrt().max(b.norm_sq().sqrt());
    if scale == 0.0 {
        diff.sqrt()
    } else {
        diff.sqrt() / scale
    }
}

pub fn rand_t(r: usize, c: usize, rng: &mut ChaCha8Rng) -> T {
    T::uniform(r, c, -1.0, 1.0, rng)
}

/// Worst relative error between tape gradients and central differences
/// over every input of `build`, each placed on the tape as a parameter.
pub fn fd_check(inputs: &[T], build: &dyn Fn(&mut Tape<f64>, &[Var]) -> Var) -> f64 {
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
    let mut worst = 0.0f64;
    for k in 0..inputs.len() {
        let analytic = grads
            .get(vars[k])
            .cloned()
            .unwrap_or_else(|| T::zeros(inputs[k].rows(), inputs[k].cols()));
        let mut numeric = T::zeros(inputs[k].rows(), inputs[k].cols());
        for i in 0..inputs[k].len() {
            let mut xs = inputs.to_vec();
            xs[k].data_mut()[i] += FD_STEP;
            let up = eval(&xs);
            xs[k].data_mut()[i] -= 2.0 * FD_STEP;
            let down = eval(&xs);
            numeric.data_mut()[i] = (up - down) / (2.0 * FD_STEP);
        }
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    worst
}

/// Contracts a tensor output with fixed random weights so every element
/// carries a distinct gradient.
fn project(tape: &mut Tape<f64>, out: Var, seed: u64) -> Var {
    let (r, c) = tape.value(out).shape();
    let w = tape.constant(rand_t(r, c, &mut ChaCha8Rng::seed_from_u64(seed)));
    let p = tape.mul(out, w).unwrap();
    tape.sum(p)
}

/// Each tape primitive checked against central differences.
pub fn primitive_suite() -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut r = |a, b| rand_t(a, b, &mut rng);
    let x23 = r(2, 3);
    let w34 = r(3, 4);
    let b14 = r(1, 4);
    let y23 = r(2, 3);
    let row13 = r(1, 3);
    let table = r(5, 3);
    let logits = r(4, 5);
    let logit = T::scalar(0.4);
    let mut out = Vec::new();
    out.push(("affine", fd_check(&[x23.clone(), w34.clone(), b14], &|t, v| {
        let a = t.affine(v[0], v[1], v[2]).unwrap();
        project(t, a, 1)
    })));
    out.push(("matmul", fd_check(&[x23.clone(), w34], &|t, v| {
        let a = t.matmul(v[0], v[1]).unwrap();
        project(t, a, 2)
    })));
    out.push(("add", fd_check(&[x23.clone(), y23.clone()], &|t, v| {
        let a = t.add(v[0], v[1]).unwrap();
        project(t, a, 3)
    })));
    out.push(("mul", fd_check(&[x23.clone(), y23.clone()], &|t, v| {
        let a = t.mul(v[0], v[1]).unwrap();
        project(t, a, 4)
    })));
    out.push(("mul_row", fd_check(&[x23.clone(), row13], &|t, v| {
        let a = t.mul_row(v[0], v[1]).unwrap();
        project(t, a, 5)
    })));
    out.push(("sigmoid", fd_check(std::slice::from_ref(&x23), &|t, v| {
        let a = t.sigmoid(v[0]);
        project(t, a, 6)
    })));
    out.push(("tanh", fd_check(std::slice::from_ref(&x23), &|t, v| {
        let a = t.tanh(v[0]);
        project(t, a, 7)
    })));
    out.push(("one_minus", fd_check(std::slice::from_ref(&x23), &|t, v| {
        let a = t.one_minus(v[0]);
        project(t, a, 8)
    })));
    out.push(("sum", fd_check(std::slice::from_ref(&x23), &|t, v| {
        let s = t.sum(v[0]);
        let sq = t.mul(s, s).unwrap();
        t.sum(sq)
    })));
    out.push(("gather", fd_check(&[table], &|t, v| {
        let a = t.gather(v[0], &[4, 0, 4, 2]).unwrap();
        project(t, a, 9)
    })));
    out.push(("concat_rows", fd_check(&[x23.clone(), y23], &|t, v| {
        let a = t.concat_rows(&[v[0], v[1], v[0]]).unwrap();
        project(t, a, 10)
    })));
    out.push(("softmax_xent", fd_check(&[logits], &|t, v| t.softmax_xent(v[0], &[0, 4, 2, 2]).unwrap())));
    let noise = T::uniform(2, 3, 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(11));
    out.push(("concrete_mask", fd_check(&[logit.clone(), x23], &|t, v| {
        let m = t.concrete_mask(v[0], noise.clone(), 0.1, 1e-6).unwrap();
        let a = t.mul(m, v[1]).unwrap();
        project(t, a, 12)
    })));
    out.push(("neg_entropy", fd_check(&[logit], &|t, v| t.neg_entropy(v[0], 3.0).unwrap())));
    out
}

/// A model, learned rates and starting state small enough for exhaustive
/// finite differences.
pub struct GradCase {
    pub model: ModelParams<f64>,
    pub rates: SiteRates<f64>,
    pub spec: DropoutSpec,
    pub state: HiddenState<f64>,
    pub chunk: Chunk,
    pub rate: f64,
}

impl GradCase {
    pub fn new(arch: Arch, spec: DropoutSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (v, e, h, batch, width) = (6, 3, 4, 2, 3);
        let mut model = ModelParams::<f64>::new(arch, v, e, h, &mut rng);
        for t in model.tensors_mut() {
            *t = T::uniform(t.rows(), t.cols(), -0.6, 0.6, &mut rng);
        }
        let mut state = HiddenState::for_model(&model, batch);
        for l in &mut state.layers {
            l.h = rand_t(batch, h, &mut rng);
            if let Some(c) = &mut l.c {
                *c = rand_t(batch, h, &mut rng);
            }
        }
        let learned = spec.variant == Variant::Concrete;
        let rate_at = |site: Site, p: f64| {
            (learned && spec.site.covers(site)).then(|| ConcreteRate::from_rate(p, spec.lambda))
        };
        let rates = SiteRates {
            input: rate_at(Site::Input, 0.3),
            hidden: rate_at(Site::Hidden, 0.4),
            output: rate_at(Site::Output, 0.25),
        };
        let chunk = Chunk {
            batch,
            width,
            inputs: vec![1, 5, 2, 0, 3, 3],
            targets: vec![5, 2, 4, 3, 3, 1],
        };
        GradCase {
            model,
            rates,
            rate: 0.3,
            spec,
            state,
            chunk,
        }
    }

    /// Cross-entropy plus the weighted rate regularizers. The mask stream is
    /// reseeded on every call, so repeated evaluations see identical masks.
    fn loss(&self, model: &ModelParams<f64>, rates: &SiteRates<f64>) -> (Tape<f64>, Var, BoundParams, RateVars, droplm::nlm::ChunkOutput) {
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, model, true);
        let rv = RateVars::register(&mut tape, rates);
        let sv = bind_state(&mut tape, &self.state);
        let shapes = MaskShapes {
            batch: self.chunk.batch,
            input: model.embed_dim,
            hidden: model.hidden_dim,
            layers: model.layers.len(),
        };
        let mut masks = MaskState::new(self.rate);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let out = {
            let mut ctx = MaskContext::new(&self.spec, &mut masks, &mut rng, shapes, rv);
            forward_chunk(&mut tape, model, &bound, &self.chunk, sv, Some(&mut ctx)).unwrap()
        };
        let mut loss = tape.softmax_xent(out.logits, &self.chunk.targets_time_major()).unwrap();
        let (e, h, l) = (model.embed_dim, model.hidden_dim, model.layers.len());
        let sites = [(rates.input, rv.input, e), (rates.hidden, rv.hidden, h * l), (rates.output, rv.output, h)];
        for (rate, var, units) in sites {
            if let (Some(rate), Some(var)) = (rate, var) {
                let term = tape.neg_entropy(var, rate.reg_weight * units as f64).unwrap();
                loss = tape.add(loss, term).unwrap();
            }
        }
        (tape, loss, bound, rv, out)
    }

    fn value(&self, model: &ModelParams<f64>, rates: &SiteRates<f64>) -> f64 {
        let (tape, loss, ..) = self.loss(model, rates);
        tape.value(loss).item()
    }

    /// Worst relative error over every parameter tensor and every learned
    /// rate logit.
    pub fn max_rel_err(&self) -> f64 {
        let (tape, loss, bound, rv, out) = self.loss(&self.model, &self.rates);
        let mut grads = tape.backward(loss).unwrap();
        let analytic = collect_grads(&self.model, &bound, &out, &mut grads).unwrap();
        let mut worst = 0.0f64;
        for (k, a) in analytic.iter().enumerate() {
            let mut numeric = T::zeros(a.rows(), a.cols());
            for i in 0..a.len() {
                let mut m = self.model.clone();
                m.tensors_mut()[k].data_mut()[i] += FD_STEP;
                let up = self.value(&m, &self.rates);
                m.tensors_mut()[k].data_mut()[i] -= 2.0 * FD_STEP;
                let down = self.value(&m, &self.rates);
                numeric.data_mut()[i] = (up - down) / (2.0 * FD_STEP);
            }
            worst = worst.max(rel_err(a, &numeric));
        }
        let rate_vars = [rv.input, rv.hidden, rv.output];
        for (slot, var) in rate_vars.iter().enumerate() {
            let Some(var) = var else { continue };
            let a = grads.take_or_zeros(*var, (1, 1));
            let shifted = |d: f64| {
                let mut r = self.rates.clone();
                let target = [&mut r.input, &mut r.hidden, &mut r.output][slot].as_mut().unwrap();
                target.logit += d;
                self.value(&self.model, &r)
            };
            let numeric = T::scalar((shifted(FD_STEP) - shifted(-FD_STEP)) / (2.0 * FD_STEP));
            worst = worst.max(rel_err(&a, &numeric));
        }
        worst
    }
}

/// Every architecture under every mask variant and site combination.
pub fn model_suite() -> Vec<(String, f64)> {
    let variants = [
        Variant::None,
        Variant::Standard,
        Variant::Gaussian,
        Variant::Variational,
        Variant::Concrete,
        Variant::CurriculumLinear,
    ];
    let sites = [Site::Input, Site::Hidden, Site::Output, Site::All];
    let mut out = Vec::new();
    for arch in [Arch::Lstm, Arch::Gru, Arch::Highway] {
        for variant in variants {
            for site in sites {
                if variant == Variant::None && site != Site::All {
                    continue;
                }
                let spec = DropoutSpec::new(variant, site).with_rate(0.3).with_p_max(0.3);
                let err = GradCase::new(arch, spec).max_rel_err();
                out.push((format!("{arch:?}/{variant:?}/{site:?}"), err));
            }
        }
    }
    out
}

pub const ORACLE_WINDOW: usize = 10;
pub const ORACLE_VOCAB: usize = 14;
const BRANCH: [usize; 4] = [10, 11, 12, 13];

/// Windows of ten tokens `0 1 2 3 4 5 x 7 8 9` where `x` is uniform over
/// four word types. Only the target at offset 5 is uncertain.
pub fn offset_corpus(windows: usize, seed: u64) -> Vec<usize> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = Vec::with_capacity(windows * ORACLE_WINDOW + 1);
    for _ in 0..windows {
        for p in 0..ORACLE_WINDOW {
            ids.push(if p == 6 { BRANCH[rng.random_range(0..4)] } else { p });
        }
    }
    ids.push(0);
    ids
}

/// Bigram lookup for [`offset_corpus`]: deterministic successors get a
/// logit margin large enough to give probability 1 to machine precision.
pub struct OffsetOracle;

impl OffsetOracle {
    const MARGIN: f64 = 60.0;

    fn row(prev: usize) -> Vec<f64> {
        let mut row = vec![0.0; ORACLE_VOCAB];
        match prev {
            5 => BRANCH.iter().for_each(|&b| row[b] = Self::MARGIN),
            p if BRANCH.contains(&p) => row[7] = Self::MARGIN,
            p => row[(p + 1) % ORACLE_WINDOW] = Self::MARGIN,
        }
        row
    }
}

impl LanguageModel<f64> for OffsetOracle {
    type State = ();

    fn vocab_size(&self) -> usize {
        ORACLE_VOCAB
    }

    fn initial_state(&self, _batch: usize) {}

    fn chunk_logits(&self, chunk: &Chunk, _state: &mut ()) -> Result<T> {
        let mut data = Vec::with_capacity(chunk.width * chunk.batch * ORACLE_VOCAB);
        for t in 0..chunk.width {
            for id in chunk.input_column(t) {
                data.extend(Self::row(id));
            }
        }
        Tensor::from_vec(chunk.width * chunk.batch, ORACLE_VOCAB, data)
    }
}

/// Fifty tokens of the Fibonacci sequence mod 7, as text.
pub fn fibonacci_text() -> String {
    let mut seq = vec![1usize, 2];
    while seq.len() < 50 {
        let n = seq.len();
        seq.push((seq[n - 1] + seq[n - 2]) % 7);
    }
    seq.iter().map(|t| format!("w{t}")).collect::<Vec<_>>().join(" ")
}

/// The overfit corpus as one unbroken id stream, used for training and
/// validation alike.
pub fn fibonacci_data() -> Corpora {
    let text = fibonacci_text();
    let toks = droplm::corpus::text_tokens(&text);
    let vocab = droplm::corpus::Vocabulary::build(&toks, 1).unwrap();
    let ids = vocab.encode(&toks, false);
    Corpora {
        vocab,
        train: ids.clone(),
        valid: ids,
        test: None,
    }
}

pub fn overfit_config(arch: Arch) -> TrainConfig {
    TrainConfig {
        epochs: 200,
        batch_size: 1,
        eval_batch_size: 1,
        bptt_len: 10,
        arch,
        embed_dim: 32,
        hidden_dim: 32,
        ..TrainConfig::default()
    }
}

/// Synthetic stand-in for a truncated treebank: Zipfian bigram text.
pub fn trend_data() -> Corpora {
    let src = SyntheticSource::new(300, 8, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let train = src.sample_text(2000, &mut rng);
    let valid = src.sample_text(400, &mut rng);
    Corpora::from_texts(&train, &valid, None, 1).unwrap()
}

pub const TREND_SEEDS: [u64; 5] = [100, 101, 102, 103, 104];

pub fn trend_config(dropout: DropoutSpec, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 10,
        batch_size: 2,
        eval_batch_size: 10,
        bptt_len: 10,
        embed_dim: 128,
        hidden_dim: 128,
        seed,
        dropout,
        ..TrainConfig::default()
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub const MC_DRAWS: usize = 1_000_000;
pub const MC_RATES: [f64; 4] = [0.1, 0.2, 0.3, 0.5];

/// One Monte Carlo comparison: observed statistic, target and allowed gap.
pub struct McCheck {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    pub tol: f64,
}

impl McCheck {
    pub fn passed(&self) -> bool {
        (self.observed - self.expected).abs() <= self.tol
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Bernoulli, Gaussian and concrete mask moments over 10⁶ draws per rate.
pub fn mask_statistics() -> Vec<McCheck> {
    use droplm::dropout::concrete::logit;
    use droplm::dropout::sampler::{concrete_indicators, sample_uniform_noise};
    use droplm::dropout::{gaussian_alpha, sample_bernoulli_mask, sample_gaussian_mask};
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let side = 1000;
    let mut out = Vec::new();
    let mut check = |name: String, observed, expected, tol| {
        out.push(McCheck {
            name,
            observed,
            expected,
            tol,
        })
    };
    for p in MC_RATES {
        let b = sample_bernoulli_mask::<f64, _>(p, side, side, &mut rng).unwrap();
        let (mean, _) = mean_var(b.data());
        let zeros = b.data().iter().filter(|&&v| v == 0.0).count() as f64 / MC_DRAWS as f64;
        check(format!("bernoulli p={p} mean"), mean, 1.0, 0.01);
        check(format!("bernoulli p={p} zero fraction"), zeros, p, 0.01 * p);

        let g = sample_gaussian_mask::<f64, _>(p, side, side, &mut rng).unwrap();
        let (mean, var) = mean_var(g.data());
        let alpha = gaussian_alpha(p);
        check(format!("gaussian p={p} mean"), mean, 1.0, 0.01);
        check(format!("gaussian p={p} variance"), var, alpha, 0.02 * alpha);

        let u = sample_uniform_noise::<f64, _>(side, side, &mut rng);
        let z = concrete_indicators(logit(p), &u, 0.1, 1e-6);
        let (mean, _) = mean_var(z.data());
        check(format!("concrete p={p} tau=0.1 mean"), mean, p, 0.02);
        let sharp = concrete_indicators(logit(p), &u, 1e-3, 1e-6);
        let above = sharp.data().iter().filter(|&&v| v > 0.5).count() as f64 / MC_DRAWS as f64;
        check(format!("concrete p={p} tau->0 fraction above 1/2"), above, p, 0.01 * p);
    }
    out
}
