//! `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Consumers take the
//! keys they understand; [`KvConfig::finish`] then rejects whatever is left.

use std::collections::BTreeMap;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key {key:?}")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: invalid value for {key}: {value:?}")]
    Value { line: usize, key: String, value: String },
    #[error("unknown key {key:?} on line {line}")]
    Unknown { line: usize, key: String },
    #[error("missing required key {0:?}")]
    Missing(String),
}

#[derive(Debug, Clone, Default)]
pub struct KvConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<KvConfig, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (k, v) = t.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if entries.contains_key(&key) {
                return Err(ConfigError::Duplicate { line, key });
            }
            entries.insert(key, (line, v.trim().to_string()));
        }
        Ok(KvConfig { entries })
    }

    /// Removes `key` and parses its value; `None` when absent.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, value)) => value.parse().map(Some).map_err(|_| ConfigError::Value {
                line,
                key: key.into(),
                value,
            }),
        }
    }

    pub fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.take(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&mut self, key: &str) -> Result<T, ConfigError> {
        self.take(key)?.ok_or_else(|| ConfigError::Missing(key.into()))
    }

    /// Parses `lo,hi`.
    pub fn take_range(&mut self, key: &str) -> Result<Option<(f64, f64)>, ConfigError> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, value)) => {
                let bad = || ConfigError::Value {
                    line,
                    key: key.into(),
                    value: value.clone(),
                };
                let (a, b) = value.split_once(',').ok_or_else(bad)?;
                let lo = a.trim().parse().map_err(|_| bad())?;
                let hi = b.trim().parse().map_err(|_| bad())?;
                Ok(Some((lo, hi)))
            }
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Errors on the first unconsumed key (by line number).
    pub fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_iter().min_by_key(|(_, (line, _))| *line) {
            None => Ok(()),
            Some((key, (line, _))) => Err(ConfigError::Unknown { line, key }),
        }
    }
}
