//! Plain-text `key=value` configuration shared by every module.
//!
//! One assignment per line, `#` starts a comment, blank lines ignored.
//! Every setting has a built-in default; a config file only overrides.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("key `{key}`: cannot parse `{value}` as {expected}")]
    BadValue {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("unknown config key(s): {0}")]
    UnknownKeys(String),
}

/// Parsed key/value assignments, order-independent.
#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    /// Empty config; every lookup falls back to the default.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str_checked(&text)
    }

    pub fn from_str_checked(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: raw.trim().to_string(),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.trim().to_string(),
                });
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(ConfigError::DuplicateKey { line, key });
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Rejects any key outside `known`; catches typos early.
    pub fn ensure_known(&self, known: &[&str]) -> Result<(), ConfigError> {
        let unknown: Vec<&str> = self
            .entries
            .keys()
            .map(String::as_str)
            .filter(|k| !known.contains(k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::UnknownKeys(unknown.join(", ")))
        }
    }

    fn parse<T: FromStr>(&self, key: &str, expected: &'static str) -> Result<Option<T>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(value) => value.parse::<T>().map(Some).map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: value.clone(),
                expected,
            }),
        }
    }

    pub fn override_f64(&self, key: &str, slot: &mut f64) -> Result<(), ConfigError> {
        if let Some(v) = self.parse::<f64>(key, "a number")? {
            *slot = v;
        }
        Ok(())
    }

    pub fn override_u64(&self, key: &str, slot: &mut u64) -> Result<(), ConfigError> {
        if let Some(v) = self.parse::<u64>(key, "an unsigned integer")? {
            *slot = v;
        }
        Ok(())
    }

    pub fn override_usize(&self, key: &str, slot: &mut usize) -> Result<(), ConfigError> {
        if let Some(v) = self.parse::<usize>(key, "an unsigned integer")? {
            *slot = v;
        }
        Ok(())
    }

    pub fn override_u16(&self, key: &str, slot: &mut u16) -> Result<(), ConfigError> {
        if let Some(v) = self.parse::<u16>(key, "a 16-bit unsigned integer")? {
            *slot = v;
        }
        Ok(())
    }

    pub fn override_string(&self, key: &str, slot: &mut String) {
        if let Some(v) = self.entries.get(key) {
            *slot = v.clone();
        }
    }

    /// Comma-separated list override, e.g. `0.01, 0.10, 0.20`.
    pub fn override_f64_list(&self, key: &str, slot: &mut Vec<f64>) -> Result<(), ConfigError> {
        if let Some(raw) = self.entries.get(key) {
            *slot = parse_list(raw).ok_or_else(|| ConfigError::BadValue {
                key: key.to_string(),
                value: raw.clone(),
                expected: "a comma-separated list of numbers",
            })?;
        }
        Ok(())
    }

    pub fn override_u16_list(&self, key: &str, slot: &mut Vec<u16>) -> Result<(), ConfigError> {
        if let Some(raw) = self.entries.get(key) {
            *slot = parse_list(raw).ok_or_else(|| ConfigError::BadValue {
                key: key.to_string(),
                value: raw.clone(),
                expected: "a comma-separated list of register addresses",
            })?;
        }
        Ok(())
    }
}

pub fn parse_list<T: FromStr>(raw: &str) -> Option<Vec<T>> {
    raw.split(',')
        .map(|item| item.trim().parse::<T>().ok())
        .collect()
}

pub fn format_list<T: Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",")
}
