use crate::error::{Error, Result};

/// A corpus laid out as `batch_size` contiguous rows for truncated BPTT.
///
/// Row `b` holds tokens `[b·steps, (b+1)·steps)` of the encoded corpus; the
/// remainder that does not fill a whole column is dropped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchStream {
    data: Vec<usize>,
    batch_size: usize,
    steps: usize,
    bptt_len: usize,
    cursor: usize,
}

/// One BPTT window: `inputs` and `targets` are `[batch, width]`, row-major,
/// and `targets` is `inputs` shifted one step along the stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chunk {
    pub batch: usize,
    pub width: usize,
    pub inputs: Vec<usize>,
    pub targets: Vec<usize>,
}

impl Chunk {
    /// Input ids of every row at timestep `t`.
    pub fn input_column(&self, t: usize) -> Vec<usize> {
        (0..self.batch).map(|b| self.inputs[b * self.width + t]).collect()
    }

    /// Targets ordered `t·batch + b`, matching the row order of stacked logits.
    pub fn targets_time_major(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.targets.len());
        for t in 0..self.width {
            for b in 0..self.batch {
                out.push(self.targets[b * self.width + t]);
            }
        }
        out
    }

    /// A single-row chunk; `targets` may be empty when only the state update matters.
    pub fn single_row(inputs: Vec<usize>, targets: Vec<usize>) -> Self {
        Chunk {
            batch: 1,
            width: inputs.len(),
            inputs,
            targets,
        }
    }
}

impl BatchStream {
    pub fn new(ids: &[usize], batch_size: usize, bptt_len: usize) -> Result<Self> {
        let needed = 2 * batch_size.max(1);
        if batch_size == 0 || ids.len() < needed {
            return Err(Error::CorpusTooShort {
                len: ids.len(),
                needed,
            });
        }
        let steps = ids.len() / batch_size;
        Ok(BatchStream {
            data: ids[..steps * batch_size].to_vec(),
            batch_size,
            steps,
            bptt_len: bptt_len.max(1),
            cursor: 0,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Columns per row.
    pub fn total_steps(&self) -> usize {
        self.steps
    }

    pub fn bptt_len(&self) -> usize {
        self.bptt_len
    }

    pub fn set_bptt_len(&mut self, bptt_len: usize) {
        self.bptt_len = bptt_len.max(1);
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.batch_size, self.steps)
    }

    pub fn get(&self, row: usize, col: usize) -> usize {
        self.data[row * self.steps + col]
    }

    pub fn row(&self, row: usize) -> &[usize] {
        &self.data[row * self.steps..(row + 1) * self.steps]
    }

    /// Number of target tokens in a full epoch.
    pub fn target_count(&self) -> usize {
        self.batch_size * (self.steps - 1)
    }

    pub fn reset(&mut self) {
        self.cursor = 0;
    }

    /// The next window, or `None` once every column has been consumed.
    pub fn next_chunk(&mut self) -> Option<Chunk> {
        if self.cursor + 1 >= self.steps {
            return None;
        }
        let width = self.bptt_len.min(self.steps - 1 - self.cursor);
        let mut inputs = Vec::with_capacity(self.batch_size * width);
        let mut targets = Vec::with_capacity(self.batch_size * width);
        for b in 0..self.batch_size {
            let row = self.row(b);
            inputs.extend_from_slice(&row[self.cursor..self.cursor + width]);
            targets.extend_from_slice(&row[self.cursor + 1..self.cursor + 1 + width]);
        }
        self.cursor += width;
        Some(Chunk {
            batch: self.batch_size,
            width,
            inputs,
            targets,
        })
    }
}

impl Iterator for BatchStream {
    type Item = Chunk;

    fn next(&mut self) -> Option<Chunk> {
        self.next_chunk()
    }
}
