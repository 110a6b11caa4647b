use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean chunk cross-entropy under training-mode dropout.
    pub train_loss: f64,
    pub val_ppl: f64,
    pub lr: f64,
    pub p_d: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    /// Global gradient norm after clipping, one per SGD step.
    pub clip_norms: Vec<f64>,
}

impl TrainLog {
    pub fn val_history(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.val_ppl).collect()
    }

    pub fn lrs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lr).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.p_d).collect()
    }

    pub fn best_val(&self) -> Option<f64> {
        self.records.iter().map(|r| r.val_ppl).reduce(f64::min)
    }

    /// The log with wall-clock time removed, for reproducibility checks.
    pub fn timeless(&self) -> TrainLog {
        let mut out = self.clone();
        for r in &mut out.records {
            r.seconds = 0.0;
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for r in &self.records {
            w.serialize(r).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Vec<EpochRecord>> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        r.deserialize()
            .collect::<Result<Vec<EpochRecord>, _>>()
            .map_err(|e| csv_err(path, e))
    }
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{other:?}")),
        ),
    }
}
