//! Experiment configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use rblab_core::envgen::EnvKind;
use rblab_core::qwi::QwiConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Environment {
    A,
    B,
}

impl Environment {
    pub fn kind(self) -> EnvKind {
        match self {
            Environment::A => EnvKind::A,
            Environment::B => EnvKind::B,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Environment::A => "A",
            Environment::B => "B",
        }
    }
}

/// Where each sample path's true model comes from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthMode {
    /// Passive rows drawn from the learner's uniform Dirichlet prior, afresh
    /// for every path.
    #[default]
    Bayesian,
    /// One monotone-matrix environment per arm count, shared by all paths.
    Fixed,
}

impl TruthMode {
    pub fn label(self) -> &'static str {
        match self {
            TruthMode::Bayesian => "bayesian",
            TruthMode::Fixed => "fixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AlgorithmName {
    #[serde(rename = "rb-tsde")]
    Tsde,
    #[serde(rename = "qwi")]
    Qwi,
    /// The Whittle policy of the true model.
    #[serde(rename = "whittle")]
    Oracle,
}

impl AlgorithmName {
    pub fn label(self) -> &'static str {
        match self {
            AlgorithmName::Tsde => "rb-tsde",
            AlgorithmName::Qwi => "qwi",
            AlgorithmName::Oracle => "whittle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    ExactJoint,
    LongRollout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    #[serde(default = "default_rollout_horizon")]
    pub horizon: usize,
    #[serde(default = "default_rollout_reps")]
    pub reps: usize,
}

fn default_rollout_horizon() -> usize {
    1_000_000
}

fn default_rollout_reps() -> usize {
    8
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { method: BaselineMethod::LongRollout, horizon: default_rollout_horizon(), reps: default_rollout_reps() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QwiParams {
    pub fast_step: f64,
    pub slow_step: f64,
    pub exploration: f64,
}

impl Default for QwiParams {
    fn default() -> Self {
        let c = QwiConfig::new(0);
        Self { fast_step: c.fast_step, slow_step: c.slow_step, exploration: c.exploration }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub environment: Environment,
    #[serde(default)]
    pub mode: TruthMode,
    pub n: Vec<usize>,
    #[serde(rename = "S")]
    pub num_states: usize,
    pub horizon: usize,
    pub sample_paths: usize,
    pub algorithms: Vec<AlgorithmName>,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub qwi: QwiParams,
    /// Number of leading sample paths whose full traces are written.
    #[serde(default)]
    pub traces: usize,
    /// Re-check posterior count invariants after every learner step.
    #[serde(default)]
    pub check_invariants: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.horizon == 0 {
            return fail("horizon must be at least 1".into());
        }
        if self.sample_paths == 0 {
            return fail("sample_paths must be at least 1".into());
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return fail("n must list positive arm counts".into());
        }
        let mut sorted = self.n.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.n.len() {
            return fail("n lists an arm count twice".into());
        }
        if self.num_states < 2 {
            return fail("S must be at least 2".into());
        }
        if self.algorithms.is_empty() {
            return fail("no algorithms listed".into());
        }
        let mut algs = self.algorithms.clone();
        algs.sort_unstable();
        algs.dedup();
        if algs.len() != self.algorithms.len() {
            return fail("an algorithm is listed twice".into());
        }
        if self.baseline.method == BaselineMethod::LongRollout && (self.baseline.horizon == 0 || self.baseline.reps < 2) {
            return fail("long_rollout needs horizon ≥ 1 and reps ≥ 2".into());
        }
        let q = &self.qwi;
        for (name, v) in [("fast_step", q.fast_step), ("slow_step", q.slow_step), ("exploration", q.exploration)] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("qwi.{name} = {v} is outside [0, 1]"));
            }
        }
        Ok(())
    }
}
