use std::fs;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::BatchStream;
use crate::error::{Error, Result};
use crate::nlm::LanguageModel;
use crate::numerics::{per_token_losses, Real};
use crate::trainer::log::csv_err;

/// Loss statistics for each offset `t` within a window of length `T`.
///
/// Deviations are kept on the loss (log) scale; [`band`](Self::band) maps
/// them through `exp` for a perplexity plot.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PerStepStats {
    pub mean_ppl: Vec<f64>,
    pub mad_lower: Vec<f64>,
    pub mad_upper: Vec<f64>,
    pub std: Vec<f64>,
    pub n: Vec<usize>,
}

/// One CSV/JSON row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub t: usize,
    pub mean_ppl: f64,
    pub mad_lower: f64,
    pub mad_upper: f64,
    pub std: f64,
    pub n: usize,
}

impl PerStepStats {
    pub fn window(&self) -> usize {
        self.mean_ppl.len()
    }

    pub fn mean_loss(&self, t: usize) -> f64 {
        self.mean_ppl[t].ln()
    }

    /// `(exp(mean - mad_lower), exp(mean + mad_upper))` at offset `t`.
    pub fn band(&self, t: usize) -> (f64, f64) {
        let m = self.mean_loss(t);
        ((m - self.mad_lower[t]).exp(), (m + self.mad_upper[t]).exp())
    }

    /// `exp` of the count-weighted mean loss over all offsets.
    pub fn overall_ppl(&self) -> f64 {
        let total: usize = self.n.iter().sum();
        let sum: f64 = (0..self.window()).map(|t| self.n[t] as f64 * self.mean_loss(t)).sum();
        (sum / total as f64).exp()
    }

    pub fn rows(&self) -> Vec<StepRow> {
        (0..self.window())
            .map(|t| StepRow {
                t,
                mean_ppl: self.mean_ppl[t],
                mad_lower: self.mad_lower[t],
                mad_upper: self.mad_upper[t],
                std: self.std[t],
                n: self.n[t],
            })
            .collect()
    }

    pub fn from_rows(rows: &[StepRow]) -> Self {
        let mut s = PerStepStats::default();
        for r in rows {
            s.mean_ppl.push(r.mean_ppl);
            s.mad_lower.push(r.mad_lower);
            s.mad_upper.push(r.mad_upper);
            s.std.push(r.std);
            s.n.push(r.n);
        }
        s
    }

    /// CSV with header `t,mean_ppl,mad_lower,mad_upper,std,n`.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for r in self.rows() {
            w.serialize(r).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let rows = r
            .deserialize()
            .collect::<Result<Vec<StepRow>, _>>()
            .map_err(|e| csv_err(path, e))?;
        Ok(Self::from_rows(&rows))
    }

    /// The same rows as a JSON array.
    pub fn export_json(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.rows()).expect("rows serialize");
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rows: Vec<StepRow> = serde_json::from_str(&text).map_err(|e| {
            Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })?;
        Ok(Self::from_rows(&rows))
    }
}

/// Splits `ids` into `batch` rows, walks each row in consecutive windows of
/// `t_len` tokens with state carried across windows, and gathers the
/// per-token loss at every offset. A trailing partial window is dropped.
pub fn per_step_stats<F: Real, M: LanguageModel<F>>(
    model: &M,
    ids: &[usize],
    t_len: usize,
    batch: usize,
) -> Result<PerStepStats> {
    let needed = t_len.max(1) + 1;
    if t_len == 0 || ids.len() / batch.max(1) < needed {
        return Err(Error::CorpusTooShort {
            len: ids.len(),
            needed: needed * batch.max(1),
        });
    }
    let mut stream = BatchStream::new(ids, batch, t_len)?;
    let mut losses: Vec<Vec<f64>> = vec![Vec::new(); t_len];
    let mut state = model.initial_state(batch);
    while let Some(chunk) = stream.next_chunk() {
        if chunk.width < t_len {
            break;
        }
        let logits = model.chunk_logits(&chunk, &mut state)?;
        let per = per_token_losses(&logits, &chunk.targets_time_major())?;
        for (row, l) in per.iter().enumerate() {
            losses[row / chunk.batch].push(l.f64());
        }
    }

    let mut s = PerStepStats::default();
    for ls in &losses {
        let n = ls.len();
        let mean = if ls.iter().all(|&l| l == ls[0]) {
            ls[0]
        } else {
            ls.iter().sum::<f64>() / n as f64
        };
        let (mut lo, mut n_lo, mut hi, mut n_hi, mut sq) = (0.0, 0usize, 0.0, 0usize, 0.0);
        for &l in ls {
            if l < mean {
                lo += mean - l;
                n_lo += 1;
            } else if l > mean {
                hi += l - mean;
                n_hi += 1;
            }
            sq += (l - mean) * (l - mean);
        }
        s.mean_ppl.push(mean.exp());
        s.mad_lower.push(if n_lo > 0 { lo / n_lo as f64 } else { 0.0 });
        s.mad_upper.push(if n_hi > 0 { hi / n_hi as f64 } else { 0.0 });
        s.std.push((sq / n as f64).sqrt());
        s.n.push(n);
    }
    Ok(s)
}
