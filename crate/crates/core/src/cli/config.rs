//! `key = value` config files merged under command-line flags.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parsed config file. `_` and `-` are interchangeable in keys, so `n_grid`
/// and `n-grid` name the same setting.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {}: expected 'key = value', got '{}'", no + 1, raw))
            })?;
            let key = normalize(k);
            if key.is_empty() {
                return Err(Error::Config(format!("config line {}: empty key", no + 1)));
            }
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("config key '{}' given twice", key)));
            }
        }
        Ok(Self {
            values,
            used: RefCell::default(),
        })
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::parse(&std::fs::read_to_string(p)?),
            None => Ok(Self::default()),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        let key = normalize(key);
        let v = self.values.get(&key).map(String::as_str);
        self.used.borrow_mut().insert(key);
        v
    }

    /// Flag value if given, else the file value, else `None`.
    pub fn opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let file = self.raw(key);
        if flag.is_some() {
            return Ok(flag);
        }
        file.map(|s| {
            s.parse::<T>()
                .map_err(|e| Error::Config(format!("config key '{}': cannot parse '{}': {}", key, s, e)))
        })
        .transpose()
    }

    pub fn get<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    /// Boolean switch: set by the flag or by `key = true` in the file.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.opt::<bool>(None, key)?.unwrap_or(false))
    }

    /// Fails on keys that no resolver asked for.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self
            .values
            .keys()
            .filter(|k| !used.contains(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "unknown config key(s) for this command: {}",
                unknown.join(", ")
            )))
        }
    }
}

/// Parses `8..207`, `8..=207`, `8:207` or `8,16,32`.
pub fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    let bad = |e: &dyn std::fmt::Display| Error::Config(format!("bad list '{}': {}", s, e));
    let s = s.trim();
    let range = s
        .split_once("..=")
        .or_else(|| s.split_once(".."))
        .or_else(|| s.split_once(':'));
    let out: Vec<usize> = if let Some((a, b)) = range {
        let a: usize = a.trim().parse().map_err(|e| bad(&e))?;
        let b: usize = b.trim().parse().map_err(|e| bad(&e))?;
        if a > b {
            return Err(bad(&"range start exceeds end"));
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|e| bad(&e)))
            .collect::<Result<_>>()?
    };
    if out.is_empty() {
        return Err(bad(&"empty list"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let cfg = ConfigFile::parse("# comment\nk = 3\nn_grid = 9 # trailing\n\nlambda=2.5\n").unwrap();
        assert_eq!(cfg.get::<usize>(None, "k", 1).unwrap(), 3);
        assert_eq!(cfg.get(Some(5usize), "k", 1).unwrap(), 5);
        assert_eq!(cfg.get::<usize>(None, "n-grid", 1).unwrap(), 9);
        assert_eq!(cfg.get::<f64>(None, "lambda", 1.0).unwrap(), 2.5);
        assert_eq!(cfg.get::<u64>(None, "seed", 7).unwrap(), 7);
        cfg.finish().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ConfigFile::parse("k 3").is_err());
        assert!(ConfigFile::parse("k=1\nk=2").is_err());
        let cfg = ConfigFile::parse("k = x\ntypo = 1").unwrap();
        assert!(cfg.get::<usize>(None, "k", 1).is_err());
        assert!(cfg.finish().is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_usize_list("8..10").unwrap(), vec![8, 9, 10]);
        assert_eq!(parse_usize_list("8..=10").unwrap(), vec![8, 9, 10]);
        assert_eq!(parse_usize_list("3:4").unwrap(), vec![3, 4]);
        assert_eq!(parse_usize_list("8, 16,32").unwrap(), vec![8, 16, 32]);
        assert!(parse_usize_list("10..8").is_err());
        assert!(parse_usize_list("a").is_err());
    }
}
