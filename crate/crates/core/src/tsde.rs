//! Thompson sampling with dynamic episodes for restless bandits (RB-TSDE).
//!
//! Time runs `t = 1..=T`. Episode `k` starts at `t_k`; at every step the
//! learner checks whether the episode has outlived its predecessor by more
//! than one step, or whether some (arm, state, action) visit count has more
//! than doubled since `t_k`. Either event starts a new episode, which draws
//! fresh dynamics from the posterior and recomputes every arm's Whittle
//! indices. With `T_0 = 0` the first episode lasts exactly one step.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};

use crate::arm::{Arm, BanditInstance, RewardModel};
use crate::bayes::Posterior;
use crate::rng::StreamRng;
use crate::sim::{Algorithm, Environment, RunTrace};
use crate::whittle::{select_actions, whittle_indices, WhittleTable};
use crate::{Error, Result};

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trigger {
    LengthRule,
    DoublingRule,
    HorizonEnd,
}

impl Trigger {
    pub fn name(self) -> &'static str {
        match self {
            Trigger::LengthRule => "length_rule",
            Trigger::DoublingRule => "doubling_rule",
            Trigger::HorizonEnd => "horizon_end",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// 1-based episode number.
    pub k: usize,
    /// Start time `t_k`.
    pub start: usize,
    /// Length `T_k`.
    pub length: usize,
    pub trigger: Trigger,
    /// Seed of the generator that drew this episode's model.
    pub sample_seed: u64,
    /// Whether the first draw failed index computation and was redrawn.
    pub resampled: bool,
}

/// The stopping test at time `t` of an episode that started at `t_k`, with
/// previous episode length `prev_len`. Visit slices are indexed alike.
/// Doubling takes precedence in the returned label.
pub fn episode_should_end(
    t: usize,
    t_k: usize,
    prev_len: usize,
    visits_now: &[u64],
    visits_at_start: &[u64],
) -> Option<Trigger> {
    if visits_now.iter().zip(visits_at_start).any(|(&now, &then)| now > 2 * then) {
        Some(Trigger::DoublingRule)
    } else if t - t_k > prev_len {
        Some(Trigger::LengthRule)
    } else {
        None
    }
}

/// `2 √(S̄ T ln T)`, the bound on the number of episodes started by `T`.
pub fn episode_count_bound(total_states: usize, horizon: usize) -> f64 {
    let t = horizon as f64;
    2.0 * libm::sqrt(total_states as f64 * t * libm::log(t))
}

/// Checks the episode-length rule, episode coverage of the horizon and, for
/// `T ≥ 2`, the episode-count bound.
pub fn check_episodes(episodes: &[EpisodeRecord], total_states: usize, horizon: usize) -> Result<()> {
    let mut prev = 0;
    let mut next_start = 1;
    for ep in episodes {
        if ep.length > prev + 1 {
            return Err(Error::EpisodeInvariant(format!(
                "episode {} has length {} after an episode of length {prev}",
                ep.k, ep.length
            )));
        }
        if ep.start != next_start || ep.length == 0 {
            return Err(Error::EpisodeInvariant(format!("episode {} does not tile the horizon", ep.k)));
        }
        next_start += ep.length;
        prev = ep.length;
    }
    if next_start != horizon + 1 {
        return Err(Error::EpisodeInvariant(format!("episode lengths sum to {}, not {horizon}", next_start - 1)));
    }
    if horizon >= 2 {
        let bound = episode_count_bound(total_states, horizon);
        if episodes.len() as f64 > bound {
            return Err(Error::EpisodeInvariant(format!("{} episodes exceed the bound {bound:.3}", episodes.len())));
        }
    }
    Ok(())
}

/// What the learner knows beforehand: rewards and the budget.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownModel {
    pub budget: usize,
    pub reward_model: RewardModel,
    pub r_passive: Vec<Vec<f64>>,
    pub r_active: Vec<Vec<f64>>,
}

impl KnownModel {
    pub fn from_instance(instance: &BanditInstance) -> Self {
        Self {
            budget: instance.budget,
            reward_model: instance.reward_model,
            r_passive: instance.arms.iter().map(|a| a.r_passive.clone()).collect(),
            r_active: instance.arms.iter().map(|a| a.r_active.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TsdeConfig {
    pub horizon: usize,
    /// Re-verify posterior count invariants after every step.
    pub check_invariants: bool,
}

impl TsdeConfig {
    pub fn new(horizon: usize) -> Self {
        Self { horizon, check_invariants: false }
    }
}

pub struct TsdeRun {
    pub trace: RunTrace,
    pub posterior: Posterior,
}

fn sampled_table(posterior: &Posterior, known: &KnownModel, rng: &mut StreamRng) -> Result<WhittleTable> {
    posterior
        .sample_model(rng)
        .into_iter()
        .enumerate()
        .map(|(i, dynamics)| {
            let arm = Arm {
                p_passive: dynamics.p_passive,
                p_active: dynamics.p_active,
                r_passive: known.r_passive[i].clone(),
                r_active: known.r_active[i].clone(),
            };
            whittle_indices(&arm)
        })
        .collect::<Result<Vec<_>>>()
        .map(WhittleTable::new)
}

/// Runs RB-TSDE against `env` for `config.horizon` steps.
pub fn run_tsde<E: Environment + ?Sized>(
    env: &mut E,
    known: &KnownModel,
    prior: Posterior,
    config: &TsdeConfig,
    rng: &mut StreamRng,
) -> Result<TsdeRun> {
    let n = env.num_arms();
    if prior.num_arms() != n || known.r_active.len() != n || known.r_passive.len() != n {
        return Err(Error::InvalidArgument(format!("learner model does not describe {n} arms")));
    }
    let horizon = config.horizon;
    let total_states: usize = prior.sizes().iter().sum();
    let mut posterior = prior;
    let mut trace = RunTrace::new(Algorithm::Tsde, n, horizon);

    let mut visits_now = Vec::new();
    let mut visits_at_start = Vec::new();
    let mut table = WhittleTable::new(Vec::new());
    let mut start = 1;
    let mut prev_len = 0;
    let mut current: Option<EpisodeRecord> = None;

    for t in 1..=horizon {
        posterior.write_visit_counts(&mut visits_now);
        let ended = match &current {
            None => Some(Trigger::LengthRule),
            Some(_) => episode_should_end(t, start, prev_len, &visits_now, &visits_at_start),
        };
        if let Some(trigger) = ended {
            if let Some(mut ep) = current.take() {
                ep.length = t - ep.start;
                ep.trigger = trigger;
                prev_len = ep.length;
                trace.episodes.push(ep);
            }
            let k = trace.episodes.len() + 1;
            start = t;
            core::mem::swap(&mut visits_at_start, &mut visits_now);
            let sample_seed = rng.next_u64();
            let mut sample_rng = StreamRng::seed_from_u64(sample_seed);
            let mut resampled = false;
            table = match sampled_table(&posterior, known, &mut sample_rng) {
                Ok(table) => table,
                Err(_) => {
                    resampled = true;
                    sample_rng.set_stream(1);
                    sampled_table(&posterior, known, &mut sample_rng)
                        .map_err(|e| Error::SampledModel { episode: k, source: Box::new(e) })?
                }
            };
            current = Some(EpisodeRecord { k, start, length: 0, trigger: Trigger::HorizonEnd, sample_seed, resampled });
        }

        let states = env.states().to_vec();
        let active = select_actions(&table, &states, known.budget);
        let reward = env.step(&active);
        let next = env.states();
        for i in 0..n {
            posterior.observe(i, states[i], u8::from(active[i]), next[i])?;
        }
        if config.check_invariants {
            posterior.check_invariants()?;
        }
        trace.push(&states, &active, reward);
    }
    if let Some(mut ep) = current {
        ep.length = horizon + 1 - ep.start;
        ep.trigger = Trigger::HorizonEnd;
        trace.episodes.push(ep);
    }
    check_episodes(&trace.episodes, total_states, horizon)?;
    Ok(TsdeRun { trace, posterior })
}
