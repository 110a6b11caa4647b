//! Text ingestion: vocabulary, encoding and contiguous BPTT batching.

mod batch;
pub mod synthetic;
mod vocab;

use std::path::Path;

pub use batch::{BatchStream, Chunk};
pub use vocab::{text_tokens, tokenize, Vocabulary, EOS, SOS, UNK};

use crate::error::{Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
