//! Flat `key = value` config files.
//!
//! One assignment per line, `#` comments, unknown keys are hard errors (a
//! typo should fail the run, not silently fall back to a default).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Result, TomoError};

pub fn parse_flat_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(TomoError::Parse(format!(
                "line {}: expected 'key = value', got '{line}'",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(TomoError::Parse(format!("line {}: empty key", lineno + 1)));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(TomoError::Parse(format!(
                "line {}: key '{key}' set twice",
                lineno + 1
            )));
        }
    }
    Ok(map)
}

/// Typed accessor over a parsed config that tracks which keys were read;
/// [`ConfigReader::finish`] rejects leftovers by name.
pub struct ConfigReader {
    map: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

impl ConfigReader {
    pub fn from_text(text: &str) -> Result<Self> {
        Ok(Self {
            map: parse_flat_config(text)?,
            used: BTreeSet::new(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        let v = self.map.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    pub fn opt_str(&mut self, key: &str) -> Option<String> {
        self.raw(key)
    }

    pub fn str_or(&mut self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or_else(|| default.to_string())
    }

    fn parse_one<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
        v.parse::<T>().map_err(|_| {
            TomoError::Config(format!(
                "key '{key}': cannot parse '{v}' as {}",
                std::any::type_name::<T>()
            ))
        })
    }

    pub fn opt_parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            Some(v) => Ok(Some(Self::parse_one(key, &v)?)),
            None => Ok(None),
        }
    }

    pub fn parse_or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.opt_parse(key)?.unwrap_or(default))
    }

    pub fn require<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        match self.raw(key) {
            Some(v) => Self::parse_one(key, &v),
            None => Err(TomoError::Config(format!("missing required key '{key}'"))),
        }
    }

    /// Comma-separated list, e.g. `k_list = 32,160`.
    pub fn opt_list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) if v.trim().is_empty() => Ok(Some(Vec::new())),
            Some(v) => v
                .split(',')
                .map(|item| Self::parse_one(key, item.trim()))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    pub fn list_or<T: std::str::FromStr>(&mut self, key: &str, default: &str) -> Result<Vec<T>> {
        match self.opt_list(key)? {
            Some(v) => Ok(v),
            None => default
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|item| Self::parse_one(key, item.trim()))
                .collect(),
        }
    }

    /// Fail on unread keys; on success return the full map for echoing into
    /// the run manifest.
    pub fn finish(self) -> Result<BTreeMap<String, String>> {
        let unknown: Vec<&String> = self
            .map
            .keys()
            .filter(|k| !self.used.contains(*k))
            .collect();
        if let Some(first) = unknown.first() {
            return Err(TomoError::Config(format!(
                "unknown config key '{first}'{}",
                if unknown.len() > 1 {
                    format!(" (and {} more)", unknown.len() - 1)
                } else {
                    String::new()
                }
            )));
        }
        Ok(self.map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_values() {
        let text = "# study\nseed = 7\nk_list = 32,160  # two sizes\n\nname = fig4\n";
        let mut r = ConfigReader::from_text(text).unwrap();
        assert_eq!(r.require::<u64>("seed").unwrap(), 7);
        assert_eq!(r.opt_list::<usize>("k_list").unwrap().unwrap(), vec![32, 160]);
        assert_eq!(r.opt_str("name").unwrap(), "fig4");
        r.finish().unwrap();
    }

    #[test]
    fn unknown_key_is_named() {
        let mut r = ConfigReader::from_text("seed = 1\ntypo_key = 3\n").unwrap();
        let _ = r.require::<u64>("seed").unwrap();
        let err = r.finish().unwrap_err().to_string();
        assert!(err.contains("typo_key"), "{err}");
    }

    #[test]
    fn duplicate_and_malformed_lines_rejected() {
        assert!(parse_flat_config("a = 1\na = 2\n").is_err());
        assert!(parse_flat_config("just words\n").is_err());
    }

    #[test]
    fn bad_number_names_the_key() {
        let mut r = ConfigReader::from_text("seed = banana\n").unwrap();
        let err = r.require::<u64>("seed").unwrap_err().to_string();
        assert!(err.contains("seed") && err.contains("banana"), "{err}");
    }

    #[test]
    fn defaults_and_empty_lists() {
        let mut r = ConfigReader::from_text("").unwrap();
        assert_eq!(r.parse_or("n_runs", 100usize).unwrap(), 100);
        let ks: Vec<usize> = r.list_or("k_list", "32,160").unwrap();
        assert_eq!(ks, vec![32, 160]);
        let mut r = ConfigReader::from_text("k_list =\n").unwrap();
        let ks: Vec<usize> = r.list_or("k_list", "32,160").unwrap();
        assert!(ks.is_empty());
    }
}
