use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const SOS: &str = "<sos>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";

/// Dense bidirectional token ↔ id map. The three markers always occupy ids
/// 0 (`<sos>`), 1 (`<eos>`) and 2 (`<unk>`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    fn with_specials() -> Self {
        let mut v = Vocabulary {
            token_to_id: HashMap::new(),
            id_to_token: Vec::new(),
        };
        for s in [SOS, EOS, UNK] {
            v.insert(s);
        }
        v
    }

    fn insert(&mut self, token: &str) -> usize {
        if let Some(&id) = self.token_to_id.get(token) {
            return id;
        }
        let id = self.id_to_token.len();
        self.token_to_id.insert(token.to_owned(), id);
        self.id_to_token.push(token.to_owned());
        id
    }

    /// Tokens seen at least `min_count` times get ids, most frequent first
    /// (ties broken lexicographically so the layout is reproducible).
    pub fn build<S: AsRef<str>>(tokens: &[S], min_count: usize) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            *counts.entry(t.as_ref()).or_default() += 1;
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));

        let mut v = Self::with_specials();
        for (t, _) in kept {
            v.insert(t);
        }
        Ok(v)
    }

    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn sos(&self) -> usize {
        0
    }

    pub fn eos(&self) -> usize {
        1
    }

    pub fn unk(&self) -> usize {
        2
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    /// Maps tokens to ids; unknown tokens become `<unk>`. With `wrap`, the
    /// sequence is bracketed by `<sos>` … `<eos>`.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S], wrap: bool) -> Vec<usize> {
        let mut out = Vec::with_capacity(tokens.len() + 2);
        if wrap {
            out.push(self.sos());
        }
        out.extend(
            tokens
                .iter()
                .map(|t| self.id(t.as_ref()).unwrap_or(self.unk())),
        );
        if wrap {
            out.push(self.eos());
        }
        out
    }

    /// Inverse of [`encode`](Self::encode) for in-range ids.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(UNK).to_owned())
            .collect()
    }

    /// Encodes running text line by line, appending `<eos>` to every line and
    /// prepending `<sos>` when `sos` is set.
    pub fn encode_text(&self, text: &str, sos: bool) -> Vec<usize> {
        let mut out = Vec::new();
        for line in text.lines() {
            if sos {
                out.push(self.sos());
            }
            out.extend(
                tokenize(line).map(|t| self.id(t).unwrap_or(self.unk())),
            );
            out.push(self.eos());
        }
        out
    }

    /// One token per line; line number is the id.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.id_to_token {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut v = Vocabulary {
            token_to_id: HashMap::new(),
            id_to_token: Vec::new(),
        };
        for (i, line) in text.lines().enumerate() {
            if v.token_to_id.contains_key(line) {
                return Err(Error::config("vocab", format!("duplicate token {line:?} at line {}", i + 1)));
            }
            v.insert(line);
        }
        for (id, s) in [SOS, EOS, UNK].iter().enumerate() {
            if v.id(s) != Some(id) {
                return Err(Error::config("vocab", format!("expected {s} at line {}", id + 1)));
            }
        }
        Ok(v)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Splits on ASCII whitespace only; the corpora ship pre-tokenized.
pub fn tokenize(text: &str) -> impl Iterator<Item = &str> {
    text.split_ascii_whitespace()
}

/// Token stream of a text with `<eos>` after every line, as used to build the
/// vocabulary from a training file.
pub fn text_tokens(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for line in text.lines() {
        out.extend(tokenize(line));
        out.push(EOS);
    }
    out
}
