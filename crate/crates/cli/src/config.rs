//! Plain `key = value` configuration files mirroring the command-line
//! flags. Lines starting with `#` and blank lines are ignored; keys are the
//! long flag names without the leading dashes.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};

pub const KEYS: &[&str] = &[
    "problem", "nodes", "dt", "tmax", "tol", "radius", "quad", "out", "trace", "mode", "m-range", "base-dt",
];

/// Upper bound on accepted file size; config files are a few lines.
pub const MAX_CONFIG_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        ensure!(text.len() <= MAX_CONFIG_BYTES, "config file larger than {MAX_CONFIG_BYTES} bytes");
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected key = value, got `{line}`", lineno + 1);
            };
            let key = key.trim();
            let value = value.trim();
            ensure!(KEYS.contains(&key), "line {}: unknown key `{key}`", lineno + 1);
            ensure!(!value.is_empty(), "line {}: empty value for `{key}`", lineno + 1);
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                bail!("line {}: duplicate key `{key}`", lineno + 1);
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Flag value if given, otherwise the parsed file entry.
    pub fn merge<T>(&self, flag: Option<T>, key: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self
                .get(key)
                .map(|s| parse(s).with_context(|| format!("config key `{key}`")))
                .transpose(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
