//! Flat key=value experiment configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::exit::{CliError, ErrorKind};

/// Parsed configuration; keys stay as strings so the report can echo them
/// verbatim and the hash is canonical.
#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::new(
                ErrorKind::Config,
                format!("cannot read config {}: {e}", path.display()),
            )
        })?;
        let mut values = BTreeMap::new();
        for (line_no, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(CliError::new(
                    ErrorKind::Config,
                    format!(
                        "{}:{}: expected key=value, got {trimmed:?}",
                        path.display(),
                        line_no + 1
                    ),
                ));
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    /// Applies `--key value` pairs; flags win over the file.
    pub fn apply_overrides(&mut self, args: &[String]) -> Result<(), CliError> {
        let mut it = args.iter();
        while let Some(flag) = it.next() {
            let Some(key) = flag.strip_prefix("--") else {
                return Err(CliError::new(
                    ErrorKind::Config,
                    format!("expected --key, got {flag:?}"),
                ));
            };
            let Some(value) = it.next() else {
                return Err(CliError::new(
                    ErrorKind::Config,
                    format!("flag --{key} is missing its value"),
                ));
            };
            self.values.insert(key.to_string(), value.clone());
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl fmt::Display) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key).ok_or_else(|| {
            CliError::new(ErrorKind::Config, format!("missing required key {key:?}"))
        })
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                CliError::new(ErrorKind::Config, format!("bad value for {key}: {e}"))
            }),
        }
    }

    pub fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    pub fn require_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        self.require(key)?;
        Ok(self.parse(key)?.expect("key present"))
    }

    /// Comma-separated list.
    pub fn parse_list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|f| {
                    f.trim().parse::<T>().map_err(|e| {
                        CliError::new(ErrorKind::Config, format!("bad value in {key}: {e}"))
                    })
                })
                .collect::<Result<Vec<T>, CliError>>()
                .map(Some),
        }
    }

    /// Seed list; the `MF_SEED` environment variable replaces it with a
    /// single seed.
    pub fn seeds(&self) -> Result<Vec<u64>, CliError> {
        if let Ok(env_seed) = std::env::var("MF_SEED") {
            let seed: u64 = env_seed.parse().map_err(|e| {
                CliError::new(ErrorKind::Config, format!("bad MF_SEED: {e}"))
            })?;
            return Ok(vec![seed]);
        }
        let seeds = self.parse_list::<u64>("seeds")?.unwrap_or_else(|| vec![1]);
        if seeds.is_empty() {
            return Err(CliError::new(ErrorKind::Config, "seeds list is empty"));
        }
        Ok(seeds)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// SHA-256 over the canonical `key=value\n` rendering.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in &self.values {
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
