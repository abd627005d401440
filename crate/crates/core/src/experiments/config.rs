//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. [`Config::finish`]
//! rejects any key the caller did not consume.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, (String, usize)>,
    resolved: Map<String, Value>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::Config(format!("line {}: invalid key `{key}`", no + 1)));
            }
            if entries
                .insert(key.to_string(), (value.trim().to_string(), no + 1))
                .is_some()
            {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", no + 1)));
            }
        }
        Ok(Self {
            entries,
            resolved: Map::new(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn take_raw(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn parse_value<T: FromStr>(key: &str, raw: &str, line: usize) -> Result<T> {
        raw.parse::<T>()
            .map_err(|_| Error::Config(format!("line {line}: cannot parse `{raw}` for `{key}`")))
    }

    fn record(&mut self, key: &str, value: Value) {
        self.resolved.insert(key.to_string(), value);
    }

    pub fn opt_f64(&mut self, key: &str) -> Result<Option<f64>> {
        let v = match self.take_raw(key) {
            Some((raw, line)) => {
                let v: f64 = match raw.as_str() {
                    "inf" | "+inf" | "infinity" => f64::INFINITY,
                    _ => Self::parse_value(key, &raw, line)?,
                };
                if v.is_nan() {
                    return Err(Error::Config(format!("line {line}: `{key}` is NaN")));
                }
                Some(v)
            }
            None => None,
        };
        self.record(key, v.map_or(Value::Null, |x| json_f64(x)));
        Ok(v)
    }

    pub fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = self.opt_f64(key)?.unwrap_or(default);
        self.record(key, json_f64(v));
        Ok(v)
    }

    pub fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        let v = match self.take_raw(key) {
            Some((raw, line)) => Self::parse_value(key, &raw, line)?,
            None => default,
        };
        self.record(key, Value::from(v));
        Ok(v)
    }

    pub fn bool(&mut self, key: &str, default: bool) -> Result<bool> {
        let v = match self.take_raw(key) {
            Some((raw, line)) => Self::parse_value(key, &raw, line)?,
            None => default,
        };
        self.record(key, Value::from(v));
        Ok(v)
    }

    pub fn string(&mut self, key: &str, default: &str) -> Result<String> {
        let v = self.take_raw(key).map_or_else(|| default.to_string(), |(raw, _)| raw);
        self.record(key, Value::from(v.clone()));
        Ok(v)
    }

    /// One of `allowed`.
    pub fn choice(&mut self, key: &str, default: &str, allowed: &[&str]) -> Result<String> {
        let v = self.string(key, default)?;
        if !allowed.contains(&v.as_str()) {
            return Err(Error::Config(format!("`{key}` must be one of {allowed:?}, got `{v}`")));
        }
        Ok(v)
    }

    /// Comma-separated reals.
    pub fn opt_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        let v = match self.take_raw(key) {
            Some((raw, line)) => Some(
                raw.split(',')
                    .map(|s| Self::parse_value::<f64>(key, s.trim(), line))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        self.record(
            key,
            v.as_ref()
                .map_or(Value::Null, |l| Value::from(l.iter().map(|x| json_f64(*x)).collect::<Vec<_>>())),
        );
        Ok(v)
    }

    /// Semicolon-separated rows of comma-separated reals.
    pub fn opt_rows(&mut self, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        let v = match self.take_raw(key) {
            Some((raw, line)) => Some(
                raw.split(';')
                    .map(|row| {
                        row.split(',')
                            .map(|s| Self::parse_value::<f64>(key, s.trim(), line))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        self.record(
            key,
            v.as_ref().map_or(Value::Null, |rows| {
                Value::from(
                    rows.iter()
                        .map(|r| Value::from(r.iter().map(|x| json_f64(*x)).collect::<Vec<_>>()))
                        .collect::<Vec<_>>(),
                )
            }),
        );
        Ok(v)
    }

    /// Fails on any key that no caller consumed.
    pub fn finish(&self) -> Result<()> {
        if let Some((key, (_, line))) = self.entries.iter().next() {
            let all: Vec<&str> = self.entries.keys().map(String::as_str).collect();
            return Err(Error::Config(format!("line {line}: unknown key `{key}` (unused: {all:?})")));
        }
        Ok(())
    }

    /// Every value read so far, defaults included.
    pub fn resolved(&self) -> Value {
        Value::Object(self.resolved.clone())
    }
}

fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else {
        Value::from(x.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn typed_values_and_defaults() {
        let mut c = Config::parse("# comment\neta = 0.5\nchains=10\nflag = true\nxs = 1, 2.5\nr = inf\n").unwrap();
        assert_eq!(c.f64("eta", 1.0).unwrap(), 0.5);
        assert_eq!(c.usize("chains", 1).unwrap(), 10);
        assert!(c.bool("flag", false).unwrap());
        assert_eq!(c.opt_list("xs").unwrap(), Some(vec![1.0, 2.5]));
        assert_eq!(c.f64("missing", 3.0).unwrap(), 3.0);
        assert!(c.f64("r", 1.0).unwrap().is_infinite());
        c.finish().unwrap();
    }

    #[test]
    fn unknown_key_is_rejected() {
        let mut c = Config::parse("eta = 0.5\netta = 0.4\n").unwrap();
        c.f64("eta", 1.0).unwrap();
        let err = c.finish().unwrap_err().to_string();
        assert!(err.contains("etta"), "{err}");
    }

    #[test]
    fn malformed_lines() {
        assert!(Config::parse("novalue\n").is_err());
        assert!(Config::parse("a = 1\na = 2\n").is_err());
        let mut c = Config::parse("n = -3\n").unwrap();
        assert!(c.usize("n", 1).is_err());
        let mut c = Config::parse("a = 1,2;3,x\n").unwrap();
        assert!(c.opt_rows("a").is_err());
    }
}
