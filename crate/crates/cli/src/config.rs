//! Flat `key = value` configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use earlydetect_core::simulation::{Frequency, Scenario};
use earlydetect_core::Method;
use sha2::{Digest, Sha256};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "EARLYDETECT_WORKERS";

const KNOWN_KEYS: &[&str] = &[
    "bootstrap",
    "csv_out",
    "cutoffs",
    "data",
    "frequency",
    "k",
    "log_transform",
    "method",
    "methods",
    "n_cases",
    "n_controls",
    "n_total",
    "out",
    "out_dir",
    "pool",
    "pool_fallback",
    "reference",
    "replicates",
    "risk_out",
    "risk_table",
    "roc_out",
    "scenario",
    "schedule_rule",
    "seed",
    "split",
    "validation",
    "workers",
];

/// A bad key, value, path or file; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

fn normalize_key(k: &str) -> String {
    k.trim().to_ascii_lowercase().replace('-', "_")
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {} is not key = value: {line}", n + 1)))?;
            c.set(k, v.trim())?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).with_context(|| format!("in config file {}", path.display()))
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let key = normalize_key(key);
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(usage(format!("unknown config key '{key}'")));
        }
        self.entries.insert(key, value.into());
        Ok(())
    }

    /// Apply `key=value` override strings.
    pub fn apply_overrides<'a>(&mut self, items: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for item in items {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| usage(format!("override '{item}' is not key=value")))?;
            self.set(k, v.trim())?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str()).filter(|s| !s.is_empty())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| usage(format!("missing required key '{key}'")))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| usage(format!("key '{key}' must be {what}, got '{v}'")))
            })
            .transpose()
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.parsed(key, "a non-negative integer")?.unwrap_or(default))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        Ok(self.parsed(key, "a non-negative integer")?.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key).map(|v| v.to_ascii_lowercase()) {
            None => Ok(default),
            Some(v) => match v.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(usage(format!("key '{key}' must be true or false, got '{v}'"))),
            },
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let v = self.get("scenario").unwrap_or("1");
        Scenario::parse(v).ok_or_else(|| usage(format!("unknown scenario '{v}' (expected 1 or 2)")))
    }

    pub fn frequency(&self) -> Result<Frequency> {
        let v = self.get("frequency").unwrap_or("annual");
        parse_frequency(v)
    }

    /// Comma-separated frequencies; `all` expands to the three schedules.
    pub fn frequencies(&self) -> Result<Vec<Frequency>> {
        let v = self.get("frequency").unwrap_or("annual");
        if v.eq_ignore_ascii_case("all") {
            return Ok(vec![Frequency::Annual, Frequency::Biannual, Frequency::Quarterly]);
        }
        v.split(',').map(parse_frequency).collect()
    }

    /// Methods from `key` (comma-separated keys or `all`).
    pub fn methods(&self, key: &str, default_all: bool) -> Result<Vec<Method>> {
        let v = match self.get(key) {
            Some(v) => v,
            None if default_all => "all",
            None => return Err(usage(format!("missing required key '{key}'"))),
        };
        if v.eq_ignore_ascii_case("all") {
            return Ok(Method::all());
        }
        let mut out = Vec::new();
        for item in v.split(',') {
            let m = Method::parse(item).ok_or_else(|| {
                usage(format!(
                    "unknown method '{}' (expected roca-cs{{1,2}}-cn{{1,2,3}}, pmm-cn{{1,2,3}} or srem)",
                    item.trim()
                ))
            })?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        Ok(out)
    }

    pub fn cutoffs(&self) -> Result<Vec<f64>> {
        let Some(v) = self.get("cutoffs") else {
            return Ok(earlydetect_core::evaluation::DEFAULT_CUTOFFS.to_vec());
        };
        let c: Vec<f64> = v
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| usage(format!("bad cutoff '{x}'"))))
            .collect::<Result<_>>()?;
        if c.is_empty() || c.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(usage(format!("cutoffs must be positive numbers, got '{v}'")));
        }
        Ok(c)
    }

    /// Worker count: config/flag, then the environment, then all cores.
    pub fn workers(&self) -> Result<Option<usize>> {
        if let Some(n) = self.parsed::<usize>("workers", "a positive integer")? {
            return positive_workers(n).map(Some);
        }
        match std::env::var(WORKERS_ENV) {
            Ok(v) if !v.trim().is_empty() => {
                let n = v
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| usage(format!("{WORKERS_ENV} must be a positive integer, got '{v}'")))?;
                positive_workers(n).map(Some)
            }
            _ => Ok(None),
        }
    }
}

fn positive_workers(n: usize) -> Result<usize> {
    if n == 0 {
        return Err(usage("workers must be at least 1"));
    }
    Ok(n)
}

fn parse_frequency(v: &str) -> Result<Frequency> {
    Frequency::parse(v)
        .ok_or_else(|| usage(format!("unknown frequency '{}' (expected annual, biannual or quarterly)", v.trim())))
}

/// SHA-256 over `key=value` lines, hex encoded.
pub fn settings_hash(settings: &[(String, String)]) -> String {
    let mut h = Sha256::new();
    for (k, v) in settings {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    hex(&h.finalize())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
