use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::anneal::LrSchedule;
use super::log::{EpochRecord, TrainLog};
use super::TrainConfig;
use crate::corpus::{BatchStream, Chunk, Vocabulary};
use crate::dropout::{
    schedule_value, ConcreteRate, MaskContext, MaskShapes, MaskState, RateSource, RateVars, Site,
    SiteRates,
};
use crate::error::{Error, Result};
use crate::nlm::{
    bind_state, collect_grads, detach_state, forward_chunk, BoundParams, HiddenState, LanguageModel,
    ModelParams,
};
use crate::numerics::{clip_global_norm, global_norm, per_token_losses, sgd_step, Real, Tape, Var};

pub const MODEL_FILE: &str = "model.bin";
pub const BEST_FILE: &str = "best.bin";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const LOG_FILE: &str = "train_log.csv";
const STATE_FILE: &str = "state.json";
const SNAPSHOT_FILE: &str = "resume.bin";

/// Encoded train/validation/test streams sharing one vocabulary.
#[derive(Clone, Debug)]
pub struct Corpora {
    pub vocab: Vocabulary,
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Option<Vec<usize>>,
}

impl Corpora {
    /// Builds the vocabulary from `train` and encodes every split with it.
    pub fn from_texts(train: &str, valid: &str, test: Option<&str>, min_count: usize) -> Result<Self> {
        let vocab = Vocabulary::build(&crate::corpus::text_tokens(train), min_count)?;
        Ok(Corpora {
            train: vocab.encode_text(train, false),
            valid: vocab.encode_text(valid, false),
            test: test.map(|t| vocab.encode_text(t, false)),
            vocab,
        })
    }
}

/// Sum of per-token cross-entropies and the token count over a full pass of
/// `stream`, with state carried across chunks and identity masks.
pub fn evaluate_loss<F: Real, M: LanguageModel<F>>(model: &M, stream: &mut BatchStream) -> Result<(f64, usize)> {
    stream.reset();
    let mut state = model.initial_state(stream.batch_size());
    let (mut sum, mut count) = (0.0, 0);
    while let Some(chunk) = stream.next_chunk() {
        let logits = model.chunk_logits(&chunk, &mut state)?;
        for l in per_token_losses(&logits, &chunk.targets_time_major())? {
            sum += l.f64();
            count += 1;
        }
    }
    stream.reset();
    Ok((sum, count))
}

/// `exp` of the mean per-token cross-entropy.
pub fn evaluate<F: Real, M: LanguageModel<F>>(model: &M, stream: &mut BatchStream) -> Result<f64> {
    let (sum, count) = evaluate_loss(model, stream)?;
    Ok((sum / count.max(1) as f64).exp())
}

/// Objective terms of one training chunk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChunkLoss {
    pub xent: f64,
    pub reg: f64,
    /// Global gradient norm after clipping.
    pub grad_norm: f64,
}

#[derive(Serialize, Deserialize)]
struct SavedState {
    epoch: usize,
    lr: LrSchedule,
    best_val: Option<f64>,
    rates: SiteRates<f64>,
    rng: ChaCha8Rng,
    log: TrainLog,
}

pub struct Trainer<F: Real> {
    pub config: TrainConfig,
    pub model: ModelParams<F>,
    pub rates: SiteRates<F>,
    pub best: Option<(f64, ModelParams<F>)>,
    pub log: TrainLog,
    pub lr: LrSchedule,
    /// Completed epochs.
    pub epoch: usize,
    rng: ChaCha8Rng,
}

fn cast_rates<F: Real, G: Real>(r: &SiteRates<F>) -> SiteRates<G> {
    let c = |r: &Option<ConcreteRate<F>>| {
        r.map(|r| ConcreteRate {
            logit: G::of(r.logit.f64()),
            reg_weight: r.reg_weight,
        })
    };
    SiteRates {
        input: c(&r.input),
        hidden: c(&r.hidden),
        output: c(&r.output),
    }
}

impl<F: Real> Trainer<F> {
    pub fn new(config: TrainConfig, vocab_size: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let model = ModelParams::new(
            config.arch,
            vocab_size,
            config.embed_dim,
            config.hidden_dim,
            &mut rng,
        );
        let d = &config.dropout;
        let mut rates = SiteRates::default();
        if d.rate_source() == RateSource::Learned {
            let r = Some(ConcreteRate::from_rate(d.init_rate, d.lambda));
            if d.site.covers(Site::Input) {
                rates.input = r;
            }
            if d.site.covers(Site::Hidden) {
                rates.hidden = r;
            }
            if d.site.covers(Site::Output) {
                rates.output = r;
            }
        }
        let lr = LrSchedule::new(config.anneal, config.lr0, config.lr_decay);
        Ok(Trainer {
            config,
            model,
            rates,
            best: None,
            log: TrainLog::default(),
            lr,
            epoch: 0,
            rng,
        })
    }

    /// Dropout rate in effect for the current epoch. Curricula run from 0 at
    /// the first epoch to `p_max` at the last.
    pub fn epoch_rate(&self) -> f64 {
        let d = &self.config.dropout;
        match d.rate_source() {
            RateSource::Fixed(p) => p,
            RateSource::Scheduled(kind) => {
                schedule_value(kind, self.epoch, self.config.epochs.saturating_sub(1), d.p_max)
            }
            RateSource::Learned => self.rates.mean_rate().unwrap_or(0.0),
        }
    }

    fn unit_counts(&self) -> [(Option<ConcreteRate<F>>, usize); 3] {
        let (e, h, l) = (self.model.embed_dim, self.model.hidden_dim, self.model.layers.len());
        [
            (self.rates.input, e),
            (self.rates.hidden, h * l),
            (self.rates.output, h),
        ]
    }

    /// Forward, backward, clip and update on one chunk. Returns the loss
    /// terms and the detached state to carry into the next chunk.
    pub fn train_chunk(
        &mut self,
        chunk: &Chunk,
        state: &HiddenState<F>,
        masks: &mut MaskState<F>,
    ) -> Result<(ChunkLoss, HiddenState<F>)> {
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, &self.model, true);
        let rv = RateVars::register(&mut tape, &self.rates);
        let sv = bind_state(&mut tape, state);
        let shapes = MaskShapes {
            batch: chunk.batch,
            input: self.model.embed_dim,
            hidden: self.model.hidden_dim,
            layers: self.model.layers.len(),
        };
        let out = {
            let mut ctx = MaskContext::new(&self.config.dropout, masks, &mut self.rng, shapes, rv);
            forward_chunk(&mut tape, &self.model, &bound, chunk, sv, Some(&mut ctx))?
        };
        let xent = tape.softmax_xent(out.logits, &chunk.targets_time_major())?;
        let mut loss = xent;
        let rate_vars = [rv.input, rv.hidden, rv.output];
        for ((rate, units), var) in self.unit_counts().into_iter().zip(rate_vars) {
            if let (Some(rate), Some(var)) = (rate, var) {
                let term = tape.neg_entropy(var, F::of(rate.reg_weight * units as f64))?;
                loss = tape.add(loss, term)?;
            }
        }
        let xent_v = tape.value(xent).item().f64();
        let total = tape.value(loss).item().f64();
        if !total.is_finite() {
            return Err(Error::NonFinite {
                epoch: self.epoch + 1,
                chunk: self.log.clip_norms.len(),
                lr: self.lr.lr,
                p_d: self.epoch_rate(),
            });
        }

        let mut grads = tape.backward(loss)?;
        let mut all = collect_grads(&self.model, &bound, &out, &mut grads)?;
        let n_model = all.len();
        let active: Vec<Var> = rate_vars.into_iter().flatten().collect();
        for &v in &active {
            all.push(grads.take_or_zeros(v, (1, 1)));
        }
        clip_global_norm(&mut all, self.config.clip_norm);
        let grad_norm = global_norm(&all);
        self.log.clip_norms.push(grad_norm);

        let lr = self.lr.lr;
        sgd_step(&mut self.model.tensors_mut(), &all[..n_model], lr);
        for (rate, g) in self.rates.iter_mut().zip(&all[n_model..]) {
            rate.logit -= F::of(lr) * g.item();
        }
        let next = detach_state(&tape, &out.state);
        Ok((
            ChunkLoss {
                xent: xent_v,
                reg: total - xent_v,
                grad_norm,
            },
            next,
        ))
    }

    /// One pass over the training stream; returns the mean chunk
    /// cross-entropy. The recurrent state starts from zero.
    pub fn train_epoch(&mut self, stream: &mut BatchStream) -> Result<f64> {
        stream.reset();
        let mut masks = MaskState::new(self.epoch_rate());
        let mut state = HiddenState::for_model(&self.model, stream.batch_size());
        let (mut sum, mut n) = (0.0, 0usize);
        while let Some(chunk) = stream.next_chunk() {
            let (loss, next) = self.train_chunk(&chunk, &state, &mut masks)?;
            sum += loss.xent;
            n += 1;
            state = next;
        }
        stream.reset();
        Ok(sum / n.max(1) as f64)
    }

    /// Train, validate, anneal and advance the curriculum.
    pub fn run_epoch(&mut self, train: &mut BatchStream, valid: &mut BatchStream) -> Result<EpochRecord> {
        let start = Instant::now();
        let lr = self.lr.lr;
        let fixed_rate = self.epoch_rate();
        let train_loss = self.train_epoch(train)?;
        let val_ppl = evaluate(&self.model, valid)?;
        if !val_ppl.is_finite() || !train_loss.is_finite() {
            return Err(Error::NonFinite {
                epoch: self.epoch + 1,
                chunk: self.log.clip_norms.len(),
                lr,
                p_d: fixed_rate,
            });
        }
        let p_d = match self.config.dropout.rate_source() {
            RateSource::Learned => self.epoch_rate(),
            _ => fixed_rate,
        };
        let record = EpochRecord {
            epoch: self.epoch + 1,
            train_loss,
            val_ppl,
            lr,
            p_d,
            seconds: start.elapsed().as_secs_f64(),
        };
        self.log.records.push(record.clone());
        self.lr.observe(&self.log.val_history());
        if self.best.as_ref().is_none_or(|(b, _)| val_ppl < *b) {
            self.best = Some((val_ppl, self.model.clone()));
        }
        self.epoch += 1;
        Ok(record)
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.config.epochs
    }

    /// Writes checkpoints, the log and everything needed to resume.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.model.save(&dir.join(MODEL_FILE))?;
        if let Some((_, best)) = &self.best {
            best.save(&dir.join(BEST_FILE))?;
        }
        self.log.write_csv(&dir.join(LOG_FILE))?;
        let snap = dir.join(SNAPSHOT_FILE);
        fs::write(&snap, self.model.to_snapshot()).map_err(|e| Error::io(&snap, e))?;
        let state = SavedState {
            epoch: self.epoch,
            lr: self.lr.clone(),
            best_val: self.best.as_ref().map(|(v, _)| *v),
            rates: cast_rates(&self.rates),
            rng: self.rng.clone(),
            log: self.log.clone(),
        };
        let path = dir.join(STATE_FILE);
        let json = serde_json::to_string_pretty(&state).expect("state serializes");
        fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }

    pub fn has_saved_state(dir: &Path) -> bool {
        dir.join(STATE_FILE).is_file() && dir.join(SNAPSHOT_FILE).is_file()
    }

    /// Restores a trainer saved by [`save`](Self::save).
    pub fn resume(config: TrainConfig, dir: &Path) -> Result<Self> {
        config.validate()?;
        let path = dir.join(STATE_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let state: SavedState = serde_json::from_str(&text).map_err(|e| Error::Checkpoint {
            path: path.clone(),
            msg: e.to_string(),
        })?;
        let snap = dir.join(SNAPSHOT_FILE);
        let bytes = fs::read(&snap).map_err(|e| Error::io(&snap, e))?;
        let model = ModelParams::from_snapshot(&bytes, &snap)?;
        let best = match state.best_val {
            Some(v) => Some((v, ModelParams::load(&dir.join(BEST_FILE))?)),
            None => None,
        };
        Ok(Trainer {
            config,
            model,
            rates: cast_rates(&state.rates),
            best,
            log: state.log,
            lr: state.lr,
            epoch: state.epoch,
            rng: state.rng,
        })
    }
}

pub struct RunResult<F> {
    pub model: ModelParams<F>,
    pub best: ModelParams<F>,
    pub rates: SiteRates<F>,
    pub log: TrainLog,
}

/// Full training run. With an output directory, checkpoints, the log and
/// resume state are written after every epoch, and `config.resume` picks
/// up from a previous save there.
pub fn run<F: Real>(config: &TrainConfig, data: &Corpora, out_dir: Option<&Path>) -> Result<RunResult<F>> {
    let mut trainer = match out_dir {
        Some(dir) if config.resume && Trainer::<F>::has_saved_state(dir) => {
            Trainer::resume(config.clone(), dir)?
        }
        _ => Trainer::new(config.clone(), data.vocab.size())?,
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        data.vocab.save(&dir.join(VOCAB_FILE))?;
    }
    let mut train = BatchStream::new(&data.train, config.batch_size, config.bptt_len)?;
    let mut valid = BatchStream::new(&data.valid, config.eval_batch_size, config.bptt_len)?;
    while !trainer.is_done() {
        trainer.run_epoch(&mut train, &mut valid)?;
        if let Some(dir) = out_dir {
            trainer.save(dir)?;
        }
    }
    let best = trainer
        .best
        .take()
        .map(|(_, m)| m)
        .unwrap_or_else(|| trainer.model.clone());
    Ok(RunResult {
        model: trainer.model,
        best,
        rates: trainer.rates,
        log: trainer.log,
    })
}

/// Independent runs over the same data, spread across threads when the
/// `parallel` feature is on. Results keep the order of `configs`.
pub fn run_many<F: Real>(configs: &[TrainConfig], data: &Corpora) -> Vec<Result<RunResult<F>>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        configs.par_iter().map(|c| run(c, data, None)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        configs.iter().map(|c| run(c, data, None)).collect()
    }
}
