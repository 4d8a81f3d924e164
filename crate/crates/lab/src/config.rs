//! Flat `key = value` configuration files.
//!
//! ```text
//! # comment
//! include = common.cfg
//! realizations = 20
//! deltas = 0.001, 0.1, 0.5, 1
//! ```
//!
//! `include` splices another file in place, resolved relative to the including
//! file. Later assignments override earlier ones, so keys after an include
//! override the preset.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

const MAX_INCLUDE_DEPTH: usize = 16;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {message}")]
    Syntax { path: String, line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("key `{key}`: cannot parse `{value}`: {message}")]
    Value { key: String, value: String, message: String },
    #[error("include nesting deeper than {MAX_INCLUDE_DEPTH} levels at {0} (cycle?)")]
    TooDeep(String),
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
    sources: Vec<PathBuf>,
    used: RefCell<BTreeSet<String>>,
}

impl Config {
    pub fn new() -> Self {
        Config::default()
    }

    /// Reads a file, following includes.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Config::new();
        cfg.load_into(path, 0)?;
        Ok(cfg)
    }

    /// Parses text; includes are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Config::new();
        cfg.parse_into(text, "<inline>", base, 0)?;
        Ok(cfg)
    }

    fn load_into(&mut self, path: &Path, depth: usize) -> Result<(), ConfigError> {
        if depth > MAX_INCLUDE_DEPTH {
            return Err(ConfigError::TooDeep(path.display().to_string()));
        }
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.sources.push(path.to_path_buf());
        let base = path.parent().unwrap_or(Path::new("."));
        self.parse_into(&text, &path.display().to_string(), base, depth)
    }

    fn parse_into(&mut self, text: &str, name: &str, base: &Path, depth: usize) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    path: name.to_string(),
                    line: i + 1,
                    message: format!("expected `key = value`, found `{line}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    path: name.to_string(),
                    line: i + 1,
                    message: "empty key".into(),
                });
            }
            if key == "include" {
                self.load_into(&base.join(value), depth + 1)?;
            } else {
                self.entries.insert(key.to_string(), value.to_string());
            }
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.trim().to_string(), value.trim().to_string());
    }

    /// Parses `key=value` and applies it.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair.split_once('=').ok_or_else(|| ConfigError::Syntax {
            path: "<command line>".into(),
            line: 0,
            message: format!("expected key=value, found `{pair}`"),
        })?;
        self.set(k, v);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        let v = self.entries.get(key).map(String::as_str);
        if v.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        v
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => parse_value(key, v),
        }
    }

    /// Comma-separated list.
    pub fn list_or<T: FromStr + Clone>(&self, key: &str, default: &[T]) -> Result<Vec<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| parse_value(key, s))
                .collect(),
        }
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn sources(&self) -> &[PathBuf] {
        &self.sources
    }

    /// Keys that were set but never read.
    pub fn unused(&self) -> Vec<String> {
        let used = self.used.borrow();
        self.entries.keys().filter(|k| !used.contains(*k)).cloned().collect()
    }
}

impl FromIterator<(String, String)> for Config {
    fn from_iter<I: IntoIterator<Item = (String, String)>>(iter: I) -> Self {
        Config {
            entries: iter.into_iter().collect(),
            ..Config::default()
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
        message: e.to_string(),
    })
}
