//! JSON model files and posterior snapshots.
//!
//! A model file holds `{n, m, reward_model, arms: [{S, p_passive, p_active,
//! r_passive, r_active}]}` with matrices as arrays of rows. Floats are
//! written in shortest round-trip form, so load → save reproduces a saved
//! file byte for byte. A posterior snapshot is a model file with an extra
//! `posterior` block holding each arm's prior and transition counts.

use std::fs;
use std::path::Path;

use rblab_core::bayes::{ArmPosterior, LearnMode, Posterior};
use rblab_core::{Arm, BanditInstance, Matrix, RewardModel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmFile {
    #[serde(rename = "S")]
    pub num_states: usize,
    pub p_passive: Vec<Vec<f64>>,
    pub p_active: Vec<Vec<f64>>,
    pub r_passive: Vec<f64>,
    pub r_active: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardModelFile {
    A,
    B,
}

impl From<RewardModel> for RewardModelFile {
    fn from(m: RewardModel) -> Self {
        match m {
            RewardModel::A => Self::A,
            RewardModel::B => Self::B,
        }
    }
}

impl From<RewardModelFile> for RewardModel {
    fn from(m: RewardModelFile) -> Self {
        match m {
            RewardModelFile::A => Self::A,
            RewardModelFile::B => Self::B,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeFile {
    BothActions,
    PassiveOnly,
}

/// Counts of one arm; row `2s + a` belongs to state `s` and action `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmCounts {
    pub prior: Vec<Vec<f64>>,
    pub transitions: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosteriorFile {
    pub mode: ModeFile,
    pub arms: Vec<ArmCounts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n: usize,
    pub m: usize,
    pub reward_model: RewardModelFile,
    /// Present only when it differs from the largest reward entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    pub arms: Vec<ArmFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posterior: Option<PosteriorFile>,
}

fn matrix(rows: &[Vec<f64>], what: &str, arm: usize, s: usize) -> Result<Matrix> {
    if rows.len() != s || rows.iter().any(|r| r.len() != s) {
        return Err(Error::ModelFile(format!("arm {arm}: {what} is not {s}x{s}")));
    }
    Matrix::from_rows(rows).ok_or_else(|| Error::ModelFile(format!("arm {arm}: ragged {what}")))
}

impl ModelFile {
    pub fn from_instance(instance: &BanditInstance) -> Self {
        let default_r_max = instance.arms.iter().map(Arm::max_reward).fold(0.0, f64::max);
        Self {
            n: instance.num_arms(),
            m: instance.budget,
            reward_model: instance.reward_model.into(),
            r_max: (instance.r_max != default_r_max).then_some(instance.r_max),
            arms: instance
                .arms
                .iter()
                .map(|a| ArmFile {
                    num_states: a.num_states(),
                    p_passive: a.p_passive.to_rows(),
                    p_active: a.p_active.to_rows(),
                    r_passive: a.r_passive.clone(),
                    r_active: a.r_active.clone(),
                })
                .collect(),
            posterior: None,
        }
    }

    /// Builds the instance, reporting every invariant violation at once.
    pub fn to_instance(&self) -> Result<BanditInstance> {
        if self.n != self.arms.len() {
            return Err(Error::ModelFile(format!("n = {} but {} arms are listed", self.n, self.arms.len())));
        }
        let mut arms = Vec::with_capacity(self.n);
        for (i, a) in self.arms.iter().enumerate() {
            let s = a.num_states;
            if s == 0 || a.r_passive.len() != s || a.r_active.len() != s {
                return Err(Error::ModelFile(format!("arm {i}: reward vectors must have S = {s} entries")));
            }
            arms.push(Arm {
                p_passive: matrix(&a.p_passive, "p_passive", i, s)?,
                p_active: matrix(&a.p_active, "p_active", i, s)?,
                r_passive: a.r_passive.clone(),
                r_active: a.r_active.clone(),
            });
        }
        let default_r_max = arms.iter().map(Arm::max_reward).fold(0.0, f64::max);
        let instance = BanditInstance {
            arms,
            budget: self.m,
            reward_model: self.reward_model.into(),
            r_max: self.r_max.unwrap_or(default_r_max),
        };
        let violations = instance.validate();
        if violations.is_empty() {
            Ok(instance)
        } else {
            let text: Vec<String> = violations.iter().map(ToString::to_string).collect();
            Err(Error::ModelFile(text.join("; ")))
        }
    }

    pub fn with_posterior(mut self, posterior: &Posterior) -> Self {
        let mode = match posterior.mode() {
            LearnMode::BothActions => ModeFile::BothActions,
            LearnMode::PassiveOnly => ModeFile::PassiveOnly,
        };
        let arms = posterior
            .arms()
            .iter()
            .map(|arm| {
                let rows = (0..arm.num_states()).flat_map(|s| [(s, 0u8), (s, 1)]);
                ArmCounts {
                    prior: rows.clone().map(|(s, a)| arm.prior(s, a).to_vec()).collect(),
                    transitions: rows.map(|(s, a)| arm.transitions(s, a).to_vec()).collect(),
                }
            })
            .collect();
        self.posterior = Some(PosteriorFile { mode, arms });
        self
    }

    /// Rebuilds the posterior block; in passive-only mode the model's active
    /// matrices are the known ones.
    pub fn to_posterior(&self) -> Result<Option<Posterior>> {
        let Some(block) = &self.posterior else { return Ok(None) };
        if block.arms.len() != self.arms.len() {
            return Err(Error::ModelFile("posterior block does not match the arm count".into()));
        }
        let mut arms = Vec::with_capacity(block.arms.len());
        for (i, (counts, model)) in block.arms.iter().zip(&self.arms).enumerate() {
            let s = model.num_states;
            if counts.prior.len() != 2 * s || counts.transitions.len() != 2 * s {
                return Err(Error::ModelFile(format!("arm {i}: posterior needs {} rows", 2 * s)));
            }
            let known = match block.mode {
                ModeFile::BothActions => None,
                ModeFile::PassiveOnly => Some(matrix(&model.p_active, "p_active", i, s)?),
            };
            let arm = ArmPosterior::from_counts(
                s,
                counts.prior.concat(),
                counts.transitions.concat(),
                known,
            )?;
            arms.push(arm);
        }
        Ok(Some(Posterior::from_arms(arms)?))
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("model files serialize");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ModelFile(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

pub fn load_instance(path: &Path) -> Result<BanditInstance> {
    ModelFile::load(path)?.to_instance()
}

pub fn save_instance(instance: &BanditInstance, path: &Path) -> Result<()> {
    ModelFile::from_instance(instance).save(path)
}
