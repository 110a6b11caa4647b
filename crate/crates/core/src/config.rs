//! Run configuration files.
//!
//! Two interchangeable forms are accepted: JSON, or flat `key = value`
//! lines where dotted keys (`dropout.variant = concrete`) or `[section]`
//! headers address nested fields. Values are read as JSON when they parse
//! as JSON and as bare strings otherwise. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::trainer::{Precision, TrainConfig};

pub const PRECISION_ENV: &str = "DROPLM_PRECISION";
pub const RESOLVED_FILE: &str = "resolved.cfg";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub train: PathBuf,
    pub valid: PathBuf,
    #[serde(default)]
    pub test: Option<PathBuf>,
    #[serde(default = "one")]
    pub min_count: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub corpus: CorpusConfig,
    pub out_dir: PathBuf,
    pub train: TrainConfig,
}

fn insert(root: &mut Map<String, Value>, key: &str, value: Value) -> Result<()> {
    let mut parts = key.split('.').peekable();
    let mut node = root;
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(Error::config(key, "empty key segment"));
        }
        if parts.peek().is_none() {
            if node.contains_key(part) {
                return Err(Error::config(key, "key given twice"));
            }
            node.insert(part.to_owned(), value);
            return Ok(());
        }
        let child = node
            .entry(part.to_owned())
            .or_insert_with(|| Value::Object(Map::new()));
        node = child
            .as_object_mut()
            .ok_or_else(|| Error::config(key, format!("`{part}` is not a section")))?;
    }
    Ok(())
}

/// Parses either form into a JSON value.
pub fn parse_text(text: &str) -> Result<Value> {
    if text.trim_start().starts_with('{') {
        return serde_json::from_str(text).map_err(|e| Error::config("<json>", e.to_string()));
    }
    let mut root = Map::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_owned();
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::config(
                format!("line {}", i + 1),
                format!("expected `key = value`, found {line:?}"),
            ));
        };
        let key = if section.is_empty() {
            k.trim().to_owned()
        } else {
            format!("{section}.{}", k.trim())
        };
        let v = v.trim();
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_owned()));
        insert(&mut root, &key, value)?;
    }
    Ok(Value::Object(root))
}

fn typed<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let key = match (prefix, path.as_str()) {
            (p, ".") => p.to_owned(),
            ("", p) => p.to_owned(),
            (pre, p) => format!("{pre}.{p}"),
        };
        let key = if key.is_empty() { "<root>".to_owned() } else { key };
        Error::config(key, e.into_inner().to_string())
    })
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_owned(), other.to_string())),
    }
}

impl RunConfig {
    /// Builds a config from a parsed value. Relative corpus and output
    /// paths are taken relative to `base`.
    pub fn from_value(value: Value, base: &Path) -> Result<Self> {
        let Value::Object(mut map) = value else {
            return Err(Error::config("<root>", "expected a table of keys"));
        };
        let corpus = map
            .remove("corpus")
            .ok_or_else(|| Error::config("corpus", "missing `corpus.train` / `corpus.valid`"))?;
        let mut corpus: CorpusConfig = typed(corpus, "corpus")?;
        let out_dir = match map.remove("out_dir") {
            Some(Value::String(s)) => PathBuf::from(s),
            Some(other) => return Err(Error::config("out_dir", format!("expected a path, found {other}"))),
            None => return Err(Error::config("out_dir", "missing output directory")),
        };
        let train: TrainConfig = typed(Value::Object(map), "")?;
        let rebase = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        corpus.train = rebase(&corpus.train);
        corpus.valid = rebase(&corpus.valid);
        corpus.test = corpus.test.as_deref().map(rebase);
        let cfg = RunConfig {
            corpus,
            out_dir: rebase(&out_dir),
            train,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        Self::from_value(parse_text(text)?, base)
    }

    /// Reads a config file; `DROPLM_PRECISION`, when set, overrides the
    /// file's precision.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = Self::parse(&text, base)?;
        if let Ok(p) = std::env::var(PRECISION_ENV) {
            cfg.train.precision = p
                .parse::<Precision>()
                .map_err(|msg| Error::config(PRECISION_ENV, msg))?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpus.min_count == 0 {
            return Err(Error::config("corpus.min_count", "min_count must be at least 1"));
        }
        self.train.validate()
    }

    pub fn to_value(&self) -> Value {
        let mut v = serde_json::to_value(&self.train).expect("config serializes");
        let map = v.as_object_mut().expect("struct serializes to a map");
        map.insert(
            "corpus".into(),
            serde_json::to_value(&self.corpus).expect("paths serialize"),
        );
        map.insert("out_dir".into(), Value::String(self.out_dir.display().to_string()));
        v
    }

    /// Every key, defaults included, in the flat form.
    pub fn to_text(&self) -> String {
        let mut pairs = Vec::new();
        flatten("", &self.to_value(), &mut pairs);
        pairs.sort();
        pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn write_resolved(&self) -> Result<PathBuf> {
        fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))?;
        let path = self.out_dir.join(RESOLVED_FILE);
        fs::write(&path, self.to_text()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
