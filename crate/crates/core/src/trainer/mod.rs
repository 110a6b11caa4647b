//! Annealed-SGD training with truncated BPTT, gradient clipping, per-epoch
//! validation, curriculum advancement and checkpointing.

mod anneal;
pub(crate) mod log;
mod run;

use serde::{Deserialize, Serialize};

pub use anneal::{anneal_lr, Anneal, LrSchedule};
pub use log::{EpochRecord, TrainLog};
pub use run::{
    evaluate, evaluate_loss, run, run_many, ChunkLoss, Corpora, RunResult, Trainer, BEST_FILE, LOG_FILE,
    MODEL_FILE, VOCAB_FILE,
};

use crate::dropout::DropoutSpec;
use crate::error::{Error, Result};
use crate::nlm::Arch;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(format!("unknown precision {other:?} (f32, f64)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub eval_batch_size: usize,
    pub bptt_len: usize,
    pub lr0: f64,
    pub lr_decay: f64,
    pub anneal: Anneal,
    pub clip_norm: f64,
    pub precision: Precision,
    pub seed: u64,
    pub arch: Arch,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Continue from the state saved in the output directory, if any.
    pub resume: bool,
    pub dropout: DropoutSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 40,
            batch_size: 64,
            eval_batch_size: 10,
            bptt_len: 30,
            lr0: 10.0,
            lr_decay: 0.3,
            anneal: Anneal::Multiply,
            clip_norm: 0.3,
            precision: Precision::F32,
            seed: 1,
            arch: Arch::Lstm,
            embed_dim: 300,
            hidden_dim: 300,
            resume: false,
            dropout: DropoutSpec::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("eval_batch_size", self.eval_batch_size),
            ("bptt_len", self.bptt_len),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::config(key, format!("{key} must be at least 1")));
            }
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::config("lr0", format!("lr0 = {} must be positive", self.lr0)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay < 1.0) {
            return Err(Error::config(
                "lr_decay",
                format!("lr_decay = {} is outside (0, 1)", self.lr_decay),
            ));
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return Err(Error::config(
                "clip_norm",
                format!("clip_norm = {} must be positive", self.clip_norm),
            ));
        }
        self.dropout.validate()
    }
}
