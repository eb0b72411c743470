//! Flat `key=value` text used for manifests, reports and config files.
//!
//! One entry per line. Blank lines and lines starting with `#` are ignored.
//! `key: value` is accepted on input as well; output always uses `=`.

use std::fmt::Display;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDoc {
    entries: Vec<(String, String)>,
}

impl KvDoc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    /// Replaces the value of the first entry named `key`, or appends one.
    pub fn set(&mut self, key: &str, value: impl Display) -> &mut Self {
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value.to_string(),
            None => self.entries.push((key.to_string(), value.to_string())),
        }
        self
    }

    pub fn comment(&mut self, text: &str) -> &mut Self {
        self.entries.push((format!("# {text}"), String::new()));
        self
    }

    pub fn extend_prefixed(&mut self, prefix: &str, other: &KvDoc) -> &mut Self {
        for (k, v) in other.iter() {
            self.entries.push((format!("{prefix}.{k}"), v.to_string()));
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Entries excluding comments, in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries
            .iter()
            .filter(|(k, _)| !k.starts_with('#'))
            .map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = KvDoc::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let split = match (line.find('='), line.find(':')) {
                (Some(e), Some(c)) => e.min(c),
                (Some(e), None) => e,
                (None, Some(c)) => c,
                (None, None) => {
                    return Err(Error::Config(format!(
                        "line {}: expected `key=value`, got `{line}`",
                        i + 1
                    )))
                }
            };
            let key = line[..split].trim();
            let value = line[split + 1..].trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", i + 1)));
            }
            doc.entries.push((key.to_string(), value.to_string()));
        }
        Ok(doc)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string()).map_err(|e| Error::io(path, e))
    }
}

impl std::fmt::Display for KvDoc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.entries {
            if k.starts_with('#') {
                writeln!(f, "{k}")?;
            } else {
                writeln!(f, "{k}={v}")?;
            }
        }
        Ok(())
    }
}
