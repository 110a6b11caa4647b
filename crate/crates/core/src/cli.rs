//! Command-line front end: `train`, `eval`, `analyze`, `generate` and
//! `schedule-preview`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{generate, per_step_stats};
use crate::config::{RunConfig, PRECISION_ENV};
use crate::corpus::{read_text, text_tokens, BatchStream, Vocabulary};
use crate::dropout::{schedule_value, ScheduleKind};
use crate::error::{Error, Result};
use crate::nlm::ModelParams;
use crate::numerics::Real;
use crate::trainer::{evaluate, run, Corpora, Precision, VOCAB_FILE};

/// Window length used by `eval`; any value gives the same perplexity.
const EVAL_BPTT: usize = 30;

#[derive(Debug, Parser)]
#[command(name = "droplm", version, about = "Recurrent language models with static, learned and scheduled dropout")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model from a run config.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Perplexity of a checkpoint on a corpus.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Per-offset perplexity statistics over windows of length `t`.
    Analyze {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 10)]
        t: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample text from a checkpoint.
    Generate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        len: usize,
        #[arg(long, default_value = "")]
        seed_text: String,
        #[arg(long, default_value_t = 0)]
        rng: u64,
    },
    /// Print the dropout rate for each epoch of a curriculum.
    SchedulePreview {
        #[arg(long)]
        kind: ScheduleKind,
        #[arg(long)]
        epochs: usize,
        #[arg(long)]
        pmax: f64,
    },
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::InvalidRate(_) | Error::EmptyCorpus | Error::CorpusTooShort { .. } => 1,
        Error::NonFinite { .. } => 3,
        Error::Io { .. } | Error::Checkpoint { .. } | Error::TargetOutOfRange { .. } | Error::Shape { .. } => 2,
    }
}

fn env_precision() -> Result<Precision> {
    match std::env::var(PRECISION_ENV) {
        Ok(p) => p.parse().map_err(|msg| Error::config(PRECISION_ENV, msg)),
        Err(_) => Ok(Precision::default()),
    }
}

fn emit(out: &mut dyn Write, line: impl std::fmt::Display) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

/// The vocabulary saved next to a checkpoint.
fn vocab_for(ckpt: &Path) -> Result<Vocabulary> {
    let dir = ckpt.parent().unwrap_or(Path::new("."));
    Vocabulary::load(&dir.join(VOCAB_FILE))
}

fn load_pair<F: Real>(ckpt: &Path) -> Result<(ModelParams<F>, Vocabulary)> {
    let model = ModelParams::<F>::load(ckpt)?;
    let vocab = vocab_for(ckpt)?;
    if vocab.size() != model.vocab_size() {
        return Err(Error::Checkpoint {
            path: ckpt.to_path_buf(),
            msg: format!(
                "checkpoint has {} outputs but {VOCAB_FILE} lists {} tokens",
                model.vocab_size(),
                vocab.size()
            ),
        });
    }
    Ok((model, vocab))
}

fn cmd_train<F: Real>(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let test = cfg.corpus.test.as_deref().map(read_text).transpose()?;
    let data = Corpora::from_texts(
        &read_text(&cfg.corpus.train)?,
        &read_text(&cfg.corpus.valid)?,
        test.as_deref(),
        cfg.corpus.min_count,
    )?;
    cfg.write_resolved()?;
    let result = run::<F>(&cfg.train, &data, Some(&cfg.out_dir))?;
    let best_val = result.log.best_val().unwrap_or(f64::NAN);
    let test_ppl = match &data.test {
        Some(ids) => Some(evaluate(
            &result.best,
            &mut BatchStream::new(ids, cfg.train.eval_batch_size, cfg.train.bptt_len)?,
        )?),
        None => None,
    };
    emit(out, format!("best valid perplexity {best_val:.2}"))?;
    if let Some(p) = test_ppl {
        emit(out, format!("test perplexity {p:.2}"))?;
    }
    let summary = serde_json::json!({
        "epochs": result.log.records.len(),
        "best_val_ppl": best_val,
        "test_ppl": test_ppl,
        "out_dir": cfg.out_dir,
    });
    emit(out, summary)
}

fn cmd_eval<F: Real>(ckpt: &Path, corpus: &Path, out: &mut dyn Write) -> Result<()> {
    let (model, vocab) = load_pair::<F>(ckpt)?;
    let ids = vocab.encode_text(&read_text(corpus)?, false);
    let mut stream = BatchStream::new(&ids, 1, EVAL_BPTT)?;
    let ppl = evaluate(&model, &mut stream)?;
    emit(out, format!("{ppl:.2}"))?;
    emit(out, serde_json::json!({ "perplexity": ppl, "tokens": stream.target_count() }))
}

fn cmd_analyze<F: Real>(ckpt: &Path, corpus: &Path, t: usize, dest: &Path, out: &mut dyn Write) -> Result<()> {
    if t == 0 {
        return Err(Error::config("t", "window length must be at least 1"));
    }
    let (model, vocab) = load_pair::<F>(ckpt)?;
    let ids = vocab.encode_text(&read_text(corpus)?, false);
    let stats = per_step_stats(&model, &ids, t, 1)?;
    stats.export_csv(dest)?;
    stats.export_json(&dest.with_extension("json"))?;
    for r in stats.rows() {
        emit(out, format!("{}\t{:.4}", r.t, r.mean_ppl))?;
    }
    Ok(())
}

fn cmd_generate<F: Real>(ckpt: &Path, len: usize, seed_text: &str, seed: u64, out: &mut dyn Write) -> Result<()> {
    let (model, vocab) = load_pair::<F>(ckpt)?;
    let mut prompt = vocab.encode(&text_tokens(seed_text), false);
    if prompt.is_empty() {
        prompt.push(vocab.eos());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = generate(&model, &prompt, len, &mut rng)?;
    emit(out, vocab.decode(&ids).join(" "))
}

fn cmd_schedule_preview(kind: ScheduleKind, epochs: usize, p_max: f64, out: &mut dyn Write) -> Result<()> {
    if !(0.0..1.0).contains(&p_max) {
        return Err(Error::config("pmax", format!("pmax = {p_max} is outside [0, 1)")));
    }
    if epochs == 0 {
        return Err(Error::config("epochs", "epochs must be at least 1"));
    }
    emit(out, "epoch\tp_d")?;
    for i in 0..=epochs {
        emit(out, format!("{i}\t{:.6}", schedule_value(kind, i, epochs, p_max)))?;
    }
    Ok(())
}

/// Runs one command, writing its report to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Train { config } => {
            let cfg = RunConfig::load(config)?;
            match cfg.train.precision {
                Precision::F32 => cmd_train::<f32>(&cfg, out),
                Precision::F64 => cmd_train::<f64>(&cfg, out),
            }
        }
        Command::Eval { ckpt, corpus } => match env_precision()? {
            Precision::F32 => cmd_eval::<f32>(ckpt, corpus, out),
            Precision::F64 => cmd_eval::<f64>(ckpt, corpus, out),
        },
        Command::Analyze { ckpt, corpus, t, out: dest } => match env_precision()? {
            Precision::F32 => cmd_analyze::<f32>(ckpt, corpus, *t, dest, out),
            Precision::F64 => cmd_analyze::<f64>(ckpt, corpus, *t, dest, out),
        },
        Command::Generate {
            ckpt,
            len,
            seed_text,
            rng,
        } => match env_precision()? {
            Precision::F32 => cmd_generate::<f32>(ckpt, *len, seed_text, *rng, out),
            Precision::F64 => cmd_generate::<f64>(ckpt, *len, seed_text, *rng, out),
        },
        Command::SchedulePreview { kind, epochs, pmax } => cmd_schedule_preview(*kind, *epochs, *pmax, out),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = write!(err, "{e}");
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
