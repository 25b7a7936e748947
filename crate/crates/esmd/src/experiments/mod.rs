//! Simulation harness: experiment configs, runners, and CSV emission.
//!
//! Config files are TOML with a top-level `experiment` tag plus one section
//! per experiment kind; command-line flags override the seed, thread count
//! and output directory. Every runner is deterministic given
//! `(config, base_seed)` and independent of the worker-thread count: each
//! work unit forks its own random stream from the unit's indices and results
//! are assembled in a fixed order.

pub mod checkpot;
pub mod comparison;
pub mod hard_design;
pub mod minimax;
pub mod path;
pub mod widthsweep;

pub use hard_design::build_hard_design;

use serde::{Deserialize, Serialize};

use crate::error::{EsmdError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    MinimaxRate,
    PathStudy,
    Comparison,
    WidthSweep,
    CheckPotentials,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_seed")]
    pub base_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub minimax_rate: minimax::MinimaxConfig,
    #[serde(default)]
    pub path_study: path::PathConfig,
    #[serde(default)]
    pub comparison: comparison::ComparisonConfig,
    #[serde(default)]
    pub width_sweep: widthsweep::WidthSweepConfig,
    #[serde(default)]
    pub check_potentials: checkpot::CheckPotentialsConfig,
}

fn default_replicates() -> usize {
    20
}

fn default_seed() -> u64 {
    1729
}

fn default_output_dir() -> String {
    "out".into()
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| EsmdError::Config(e.to_string()))?;
        if cfg.replicates == 0 {
            return Err(EsmdError::Config("replicates must be >= 1".into()));
        }
        Ok(cfg)
    }
}

/// A finished experiment: named CSV files plus a flat key-value summary.
#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub files: Vec<(String, String)>,
    pub summary: Vec<(String, String)>,
    /// Set when any acceptance-style check inside the experiment failed
    /// (drives the CLI exit code for `check-potentials`).
    pub failed: bool,
}

impl ExperimentOutput {
    pub fn push_summary(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    /// Flat JSON object for machine consumption.
    pub fn summary_json(&self) -> String {
        let mut map = serde_json::Map::new();
        for (k, v) in &self.summary {
            let value = v
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
                .map(serde_json::Value::Number)
                .unwrap_or_else(|| serde_json::Value::String(v.clone()));
            map.insert(k.clone(), value);
        }
        serde_json::Value::Object(map).to_string()
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match cfg.experiment {
        ExperimentKind::MinimaxRate => minimax::run(cfg),
        ExperimentKind::PathStudy => path::run(cfg),
        ExperimentKind::Comparison => comparison::run(cfg),
        ExperimentKind::WidthSweep => widthsweep::run(cfg),
        ExperimentKind::CheckPotentials => checkpot::run(cfg),
    }
}
