//! Machine-readable run reports: config echo, per-seed metrics, aggregate
//! statistics and phase timings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::exit::{CliError, ErrorKind};

pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Metric name -> value; BTreeMap keeps the serialization canonical.
pub type MetricMap = BTreeMap<String, f64>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub metrics: MetricMap,
    /// Phase name -> seconds. Excluded from determinism comparisons.
    pub wall_clock_seconds: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: MetricMap,
    pub std: MetricMap,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub library_version: String,
    pub method: String,
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedResult>,
    pub aggregate: Aggregate,
}

impl RunReport {
    pub fn new(method: &str, config: &Config, per_seed: Vec<SeedResult>) -> Self {
        let aggregate = aggregate(&per_seed);
        Self {
            library_version: LIBRARY_VERSION.to_string(),
            method: method.to_string(),
            config: config.entries().clone(),
            config_hash: config.hash(),
            seeds: per_seed.iter().map(|s| s.seed).collect(),
            per_seed,
            aggregate,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self).map_err(|e| {
            CliError::new(ErrorKind::Numerical, format!("serialize report: {e}"))
        })?;
        std::fs::write(path, json).map_err(|e| {
            CliError::new(
                ErrorKind::Data,
                format!("cannot write report {}: {e}", path.display()),
            )
        })
    }
}

/// Mean and population standard deviation per metric.
pub fn aggregate(per_seed: &[SeedResult]) -> Aggregate {
    let mut mean = MetricMap::new();
    let mut std = MetricMap::new();
    if per_seed.is_empty() {
        return Aggregate { mean, std };
    }
    let names: Vec<String> = per_seed[0].metrics.keys().cloned().collect();
    let n = per_seed.len() as f64;
    for name in names {
        let values: Vec<f64> = per_seed
            .iter()
            .filter_map(|s| s.metrics.get(&name).copied())
            .collect();
        let m = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        mean.insert(name.clone(), m);
        std.insert(name, var.sqrt());
    }
    Aggregate { mean, std }
}
