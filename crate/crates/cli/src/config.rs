//! Flat `key = value` experiment configuration with command-line overrides.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context, Result};
use toml::Value;

/// Environment variable that may override the seed.
pub const SEED_ENV: &str = "DLM_SEED";

/// Resolved configuration. Every lookup records the value it returned, so
/// the header can list defaults as well as explicit settings.
#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, Value>,
    resolved: Mutex<BTreeMap<String, Value>>,
    used: Mutex<BTreeSet<String>>,
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses a flat TOML table; nested tables are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().context("config is not valid TOML")?;
        let mut cfg = Self::new();
        for (k, v) in table {
            if v.is_table() {
                bail!("config key '{k}' is a table; only flat key = value pairs are allowed");
            }
            cfg.values.insert(k, v);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Applies `key=value`. The value is read as a TOML value and falls back
    /// to a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| anyhow!("override '{assignment}' is not of the form key=value"))?;
        let k = k.trim();
        if k.is_empty() {
            bail!("override '{assignment}' has an empty key");
        }
        let v = v.trim();
        let value = format!("x = {v}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("x"))
            .unwrap_or_else(|| Value::String(v.to_string()));
        self.values.insert(k.to_string(), value);
        Ok(())
    }

    pub fn insert(&mut self, key: &str, value: Value) {
        self.values.insert(key.to_string(), value);
    }

    fn lookup(&self, key: &str, default: Value) -> Value {
        self.used.lock().unwrap().insert(key.to_string());
        let v = self.values.get(key).cloned().unwrap_or(default);
        self.resolved.lock().unwrap().insert(key.to_string(), v.clone());
        v
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        as_f64(key, &self.lookup(key, Value::Float(default)))
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.lookup(key, Value::Integer(default as i64)) {
            Value::Integer(i) if i >= 0 => Ok(i as usize),
            Value::Float(f) if f >= 0.0 && f.fract() == 0.0 && f < 9.0e15 => Ok(f as usize),
            v => bail!("config key '{key}' must be a non-negative integer, got {v}"),
        }
    }

    pub fn u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.lookup(key, Value::Integer(default as i64)) {
            Value::Integer(i) if i >= 0 => Ok(i as u64),
            v => bail!("config key '{key}' must be a non-negative integer, got {v}"),
        }
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.lookup(key, Value::Boolean(default)) {
            Value::Boolean(b) => Ok(b),
            v => bail!("config key '{key}' must be true or false, got {v}"),
        }
    }

    pub fn string(&self, key: &str, default: &str) -> Result<String> {
        match self.lookup(key, Value::String(default.to_string())) {
            Value::String(s) => Ok(s),
            v => bail!("config key '{key}' must be a string, got {v}"),
        }
    }

    /// Optional string without a default.
    pub fn opt_string(&self, key: &str) -> Result<Option<String>> {
        self.used.lock().unwrap().insert(key.to_string());
        match self.values.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => {
                self.resolved.lock().unwrap().insert(key.to_string(), Value::String(s.clone()));
                Ok(Some(s.clone()))
            }
            Some(v) => bail!("config key '{key}' must be a string, got {v}"),
        }
    }

    /// A list of numbers; a single number is accepted as a one-element list.
    pub fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        let d = Value::Array(default.iter().map(|&x| Value::Float(x)).collect());
        match self.lookup(key, d) {
            Value::Array(a) => a.iter().map(|v| as_f64(key, v)).collect(),
            v => Ok(vec![as_f64(key, &v)?]),
        }
    }

    pub fn string_list(&self, key: &str, default: &[&str]) -> Result<Vec<String>> {
        let d = Value::Array(default.iter().map(|s| Value::String(s.to_string())).collect());
        let list = match self.lookup(key, d) {
            Value::Array(a) => a,
            v => vec![v],
        };
        list.into_iter()
            .map(|v| match v {
                Value::String(s) => Ok(s),
                v => bail!("config key '{key}' must hold strings, got {v}"),
            })
            .collect()
    }

    /// Fails on keys that the driver never looked at.
    pub fn check_unused(&self) -> Result<()> {
        let used = self.used.lock().unwrap();
        let unknown: Vec<&str> = self.values.keys().filter(|k| !used.contains(*k)).map(|k| k.as_str()).collect();
        if !unknown.is_empty() {
            bail!("unknown config key(s): {}", unknown.join(", "));
        }
        Ok(())
    }

    /// `# dlm <version> <command> key=value ...` over every resolved key.
    pub fn header(&self, command: &str) -> String {
        let mut s = format!("# dlm {} {command}", dlm_core::VERSION);
        for (k, v) in self.resolved.lock().unwrap().iter() {
            let _ = write!(s, " {k}={v}");
        }
        s.push('\n');
        s
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        v => bail!("config key '{key}' must be a number, got {v}"),
    }
}
