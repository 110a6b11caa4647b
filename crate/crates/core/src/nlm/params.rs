use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Real, Tensor};

pub const LAYERS: usize = 2;
pub const INIT_RANGE: f64 = 0.1;
const MAGIC: &[u8; 4] = b"DLM1";
const SNAPSHOT_MAGIC: &[u8; 4] = b"DLMF";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Lstm,
    Gru,
    Highway,
}

impl Arch {
    /// Gate order: LSTM `i, f, g, o`; GRU `z, r, n`; highway `t, s`.
    pub fn gate_count(self) -> usize {
        match self {
            Arch::Lstm => 4,
            Arch::Gru => 3,
            Arch::Highway => 2,
        }
    }

    pub fn has_cell(self) -> bool {
        self == Arch::Lstm
    }

    fn tag(self) -> u32 {
        match self {
            Arch::Lstm => 0,
            Arch::Gru => 1,
            Arch::Highway => 2,
        }
    }

    fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(Arch::Lstm),
            1 => Some(Arch::Gru),
            2 => Some(Arch::Highway),
            _ => None,
        }
    }
}

impl FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lstm" => Ok(Arch::Lstm),
            "gru" => Ok(Arch::Gru),
            "highway" => Ok(Arch::Highway),
            other => Err(format!("unknown arch {other:?} (lstm, gru, highway)")),
        }
    }
}

/// Weights of one gate: `x·W + h·U + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct GateParams<F> {
    pub w: Tensor<F>,
    pub u: Tensor<F>,
    pub b: Tensor<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellParams<F> {
    pub gates: Vec<GateParams<F>>,
}

impl<F: Real> CellParams<F> {
    fn new(arch: Arch, input: usize, hidden: usize, init: &mut impl FnMut(usize, usize) -> Tensor<F>) -> Self {
        CellParams {
            gates: (0..arch.gate_count())
                .map(|_| GateParams {
                    w: init(input, hidden),
                    u: init(hidden, hidden),
                    b: init(1, hidden),
                })
                .collect(),
        }
    }
}

/// Embedding, two recurrent layers and an untied decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<F> {
    pub arch: Arch,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub embedding: Tensor<F>,
    pub layers: Vec<CellParams<F>>,
    pub decoder_w: Tensor<F>,
    pub decoder_b: Tensor<F>,
}

impl<F: Real> ModelParams<F> {
    /// Every parameter uniform in `[-0.1, 0.1]`.
    pub fn new<R: Rng + ?Sized>(arch: Arch, vocab: usize, embed_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut init = |r, c| Tensor::uniform(r, c, -INIT_RANGE, INIT_RANGE, rng);
        Self::build(arch, vocab, embed_dim, hidden_dim, &mut init)
    }

    pub fn zeros(arch: Arch, vocab: usize, embed_dim: usize, hidden_dim: usize) -> Self {
        Self::build(arch, vocab, embed_dim, hidden_dim, &mut |r, c| Tensor::zeros(r, c))
    }

    fn build(
        arch: Arch,
        vocab: usize,
        e: usize,
        h: usize,
        init: &mut impl FnMut(usize, usize) -> Tensor<F>,
    ) -> Self {
        let embedding = init(vocab, e);
        let layers = (0..LAYERS)
            .map(|l| CellParams::new(arch, if l == 0 { e } else { h }, h, init))
            .collect();
        let decoder_w = init(h, vocab);
        let decoder_b = init(1, vocab);
        ModelParams {
            arch,
            embed_dim: e,
            hidden_dim: h,
            embedding,
            layers,
            decoder_w,
            decoder_b,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows()
    }

    /// All parameters in checkpoint order: embedding, each layer's gates
    /// (`W, U, b` per gate), decoder weights, decoder bias.
    pub fn tensors(&self) -> Vec<&Tensor<F>> {
        let mut out = vec![&self.embedding];
        for layer in &self.layers {
            for g in &layer.gates {
                out.extend([&g.w, &g.u, &g.b]);
            }
        }
        out.extend([&self.decoder_w, &self.decoder_b]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<F>> {
        let mut out = vec![&mut self.embedding];
        for layer in &mut self.layers {
            for g in &mut layer.gates {
                out.extend([&mut g.w, &mut g.u, &mut g.b]);
            }
        }
        out.extend([&mut self.decoder_w, &mut self.decoder_b]);
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn cast<G: Real>(&self) -> ModelParams<G> {
        ModelParams {
            arch: self.arch,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            embedding: self.embedding.cast(),
            layers: self
                .layers
                .iter()
                .map(|l| CellParams {
                    gates: l
                        .gates
                        .iter()
                        .map(|g| GateParams {
                            w: g.w.cast(),
                            u: g.u.cast(),
                            b: g.b.cast(),
                        })
                        .collect(),
                })
                .collect(),
            decoder_w: self.decoder_w.cast(),
            decoder_b: self.decoder_b.cast(),
        }
    }

    /// Checkpoint bytes: `DLM1`, then arch tag, embedding dim, hidden dim and
    /// vocabulary size as little-endian `u32`, then every parameter (in
    /// [`tensors`](Self::tensors) order) as little-endian `f32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.encode(MAGIC, 4)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        Self::decode(bytes, path, MAGIC, 4)
    }

    /// Same layout as [`to_bytes`](Self::to_bytes) but tagged `DLMF` with
    /// `f64` values, so a training run can resume without rounding.
    pub fn to_snapshot(&self) -> Vec<u8> {
        self.encode(SNAPSHOT_MAGIC, 8)
    }

    pub fn from_snapshot(bytes: &[u8], path: &Path) -> Result<Self> {
        Self::decode(bytes, path, SNAPSHOT_MAGIC, 8)
    }

    fn encode(&self, magic: &[u8; 4], width: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + width * self.param_count());
        out.extend_from_slice(magic);
        for v in [
            self.arch.tag(),
            self.embed_dim as u32,
            self.hidden_dim as u32,
            self.vocab_size() as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for t in self.tensors() {
            for &x in t.data() {
                if width == 4 {
                    out.extend_from_slice(&(x.f64() as f32).to_le_bytes());
                } else {
                    out.extend_from_slice(&x.f64().to_le_bytes());
                }
            }
        }
        out
    }

    fn decode(bytes: &[u8], path: &Path, magic: &[u8; 4], width: usize) -> Result<Self> {
        let bad = |msg: String| Error::Checkpoint {
            path: path.to_path_buf(),
            msg,
        };
        if bytes.len() < 20 || &bytes[..4] != magic {
            let tag = String::from_utf8_lossy(magic);
            return Err(bad(format!("missing {tag} header")));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        let arch = Arch::from_tag(word(0)).ok_or_else(|| bad(format!("unknown arch tag {}", word(0))))?;
        let (e, h, v) = (word(1) as usize, word(2) as usize, word(3) as usize);
        let mut model = Self::zeros(arch, v, e, h);
        let expected = 20 + width * model.param_count();
        if bytes.len() != expected {
            return Err(bad(format!("expected {expected} bytes, found {}", bytes.len())));
        }
        let mut values = bytes[20..].chunks_exact(width).map(|c| {
            if width == 4 {
                F::of(f32::from_le_bytes(c.try_into().unwrap()) as f64)
            } else {
                F::of(f64::from_le_bytes(c.try_into().unwrap()))
            }
        });
        for t in model.tensors_mut() {
            for x in t.data_mut() {
                *x = values.next().expect("length checked");
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}
