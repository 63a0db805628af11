//! Environments, the ground-truth simulator, and run traces.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::arm::BanditInstance;
use crate::rng::StreamRng;
use crate::tsde::EpisodeRecord;
use crate::whittle::{select_actions, select_actions_into, SelectScratch, WhittleTable};
use crate::{Error, Result};

/// What a learner may touch: current states, and a step function that
/// applies an action vector and returns the aggregate reward.
pub trait Environment {
    fn num_arms(&self) -> usize;

    /// Current per-arm states.
    fn states(&self) -> &[usize];

    /// Collects the reward of `active` at the current states, then moves
    /// every arm one step.
    fn step(&mut self, active: &[bool]) -> f64;
}

/// Draws an index from a probability row by inverse CDF.
pub fn sample_row<R: RngCore + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Running sums of every transition row, built with the same additions as
/// [`sample_row`], so lookups draw identical states from identical uniforms.
struct CdfTable {
    /// Per arm, `[action][state]` rows of cumulative mass.
    cdf: Vec<[Vec<Vec<f64>>; 2]>,
    /// Per arm, `[action][state]` last index of positive mass.
    last: Vec<[Vec<usize>; 2]>,
}

impl CdfTable {
    fn new(instance: &BanditInstance) -> Self {
        let build = |p: &crate::Matrix| -> (Vec<Vec<f64>>, Vec<usize>) {
            p.iter_rows()
                .map(|row| {
                    let (mut acc, mut last) = (0.0, 0);
                    let cdf = row
                        .iter()
                        .enumerate()
                        .map(|(i, &x)| {
                            if x > 0.0 {
                                acc += x;
                                last = i;
                            }
                            acc
                        })
                        .collect();
                    (cdf, last)
                })
                .unzip()
        };
        let (mut cdf, mut last) = (Vec::new(), Vec::new());
        for arm in &instance.arms {
            let (c0, l0) = build(&arm.p_passive);
            let (c1, l1) = build(&arm.p_active);
            cdf.push([c0, c1]);
            last.push([l0, l1]);
        }
        Self { cdf, last }
    }

    fn sample<R: RngCore + ?Sized>(&self, arm: usize, action: bool, state: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let a = usize::from(action);
        let row = &self.cdf[arm][a][state];
        let i = row.partition_point(|&c| c <= u);
        if i < row.len() {
            i
        } else {
            self.last[arm][a][state]
        }
    }
}

/// Simulates a known bandit instance.
pub struct Simulator {
    instance: BanditInstance,
    states: Vec<usize>,
    rng: StreamRng,
}

impl Simulator {
    /// Starts every arm in state 0.
    pub fn new(instance: BanditInstance, rng: StreamRng) -> Self {
        let states = vec![0; instance.num_arms()];
        Self { instance, states, rng }
    }

    pub fn with_states(instance: BanditInstance, states: Vec<usize>, rng: StreamRng) -> Result<Self> {
        let joint = crate::JointState::new(states, &instance)?;
        Ok(Self { instance, states: joint.0, rng })
    }
}

impl Environment for Simulator {
    fn num_arms(&self) -> usize {
        self.states.len()
    }

    fn states(&self) -> &[usize] {
        &self.states
    }

    fn step(&mut self, active: &[bool]) -> f64 {
        let reward = self.instance.joint_reward(&self.states, active);
        for ((s, arm), &a) in self.states.iter_mut().zip(&self.instance.arms).zip(active) {
            *s = sample_row(arm.transition(u8::from(a)).row(*s), &mut self.rng);
        }
        reward
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Tsde,
    Qwi,
    /// The index policy of a known model.
    IndexPolicy,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Tsde => "rb-tsde",
            Algorithm::Qwi => "qwi",
            Algorithm::IndexPolicy => "whittle",
        }
    }
}

/// Everything a run produced, for `t = 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub algorithm: Algorithm,
    pub num_arms: usize,
    /// Joint state at each step, flattened (`T × n`).
    pub states: Vec<usize>,
    /// Action vector at each step, flattened (`T × n`).
    pub actions: Vec<bool>,
    pub rewards: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Empty for algorithms without episodes.
    pub episodes: Vec<EpisodeRecord>,
}

impl RunTrace {
    pub fn new(algorithm: Algorithm, num_arms: usize, horizon: usize) -> Self {
        Self {
            algorithm,
            num_arms,
            states: Vec::with_capacity(horizon * num_arms),
            actions: Vec::with_capacity(horizon * num_arms),
            rewards: Vec::with_capacity(horizon),
            cumulative: Vec::with_capacity(horizon),
            episodes: Vec::new(),
        }
    }

    pub fn push(&mut self, states: &[usize], actions: &[bool], reward: f64) {
        let total = self.cumulative.last().copied().unwrap_or(0.0) + reward;
        self.states.extend_from_slice(states);
        self.actions.extend_from_slice(actions);
        self.rewards.push(reward);
        self.cumulative.push(total);
    }

    pub fn horizon(&self) -> usize {
        self.rewards.len()
    }

    /// Joint state at 1-based time `t`.
    pub fn state_at(&self, t: usize) -> &[usize] {
        &self.states[(t - 1) * self.num_arms..t * self.num_arms]
    }

    pub fn actions_at(&self, t: usize) -> &[bool] {
        &self.actions[(t - 1) * self.num_arms..t * self.num_arms]
    }

    /// Episode number (1-based) of every step; zeros when there are no episodes.
    pub fn episode_labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.horizon()];
        for ep in &self.episodes {
            for t in ep.start..ep.start + ep.length {
                labels[t - 1] = ep.k;
            }
        }
        labels
    }
}

/// Plays the index policy of `tables` for `horizon` steps.
pub fn run_index_policy<E: Environment + ?Sized>(
    env: &mut E,
    tables: &WhittleTable,
    budget: usize,
    horizon: usize,
) -> RunTrace {
    let mut trace = RunTrace::new(Algorithm::IndexPolicy, env.num_arms(), horizon);
    for _ in 0..horizon {
        let states = env.states().to_vec();
        let active = select_actions(tables, &states, budget);
        let reward = env.step(&active);
        trace.push(&states, &active, reward);
    }
    trace
}

/// Sample mean of independent estimates and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Average reward of the index policy over `reps` independent rollouts of
/// `horizon` steps, each after a burn-in of `horizon / 10` steps.
pub fn rollout_gain(
    instance: &BanditInstance,
    tables: &WhittleTable,
    horizon: usize,
    reps: usize,
    rng: &mut StreamRng,
) -> Result<GainEstimate> {
    if horizon == 0 || reps < 2 {
        return Err(Error::InvalidArgument("rollout needs horizon ≥ 1 and at least 2 repetitions".into()));
    }
    let burn_in = horizon / 10;
    let n = instance.num_arms();
    let mut states = vec![0; n];
    let mut means = Vec::with_capacity(reps);
    let mut scratch = SelectScratch::default();
    let table = CdfTable::new(instance);
    for _ in 0..reps {
        states.iter_mut().for_each(|s| *s = 0);
        let mut total = 0.0;
        for t in 0..burn_in + horizon {
            select_actions_into(tables, &states, instance.budget, &mut scratch);
            let active = &scratch.active;
            if t >= burn_in {
                total += instance.joint_reward(&states, active);
            }
            for (i, (s, &a)) in states.iter_mut().zip(active).enumerate() {
                *s = table.sample(i, a, *s, rng);
            }
        }
        means.push(total / horizon as f64);
    }
    let mean = means.iter().sum::<f64>() / reps as f64;
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (reps - 1) as f64;
    Ok(GainEstimate { mean, stderr: libm::sqrt(var / reps as f64) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm::{Arm, RewardModel};
    use crate::rng::seeded;
    use crate::Matrix;

    #[test]
    fn sample_row_inverse_cdf() {
        let mut rng = seeded(1);
        for _ in 0..100 {
            assert_eq!(sample_row(&[0.0, 1.0, 0.0], &mut rng), 1);
            assert_ne!(sample_row(&[0.5, 0.0, 0.5], &mut rng), 1);
        }
    }

    #[test]
    fn cdf_table_draws_match_sample_row() {
        let p0 = Matrix::from_rows(&[[0.0, 0.3, 0.0, 0.7], [0.1, 0.2, 0.3, 0.4], [0.0, 0.0, 1.0, 0.0], [0.25; 4]]).unwrap();
        let p1 = Matrix::from_rows(&[[1.0, 0.0, 0.0, 0.0], [0.1, 0.0, 0.0, 0.9], [0.2, 0.2, 0.2, 0.4], [0.0, 0.0, 0.0, 1.0]]).unwrap();
        let arm = Arm::new(p0, p1, vec![0.0; 4], vec![0.0; 4]).unwrap();
        let inst = BanditInstance::new(vec![arm], 1, RewardModel::A).unwrap();
        let table = CdfTable::new(&inst);
        let (mut a, mut b) = (seeded(5), seeded(5));
        for k in 0..4000 {
            let (state, action) = (k % 4, k % 3 == 0);
            let row = inst.arms[0].transition(u8::from(action)).row(state);
            assert_eq!(table.sample(0, action, state, &mut a), sample_row(row, &mut b));
        }
    }

    #[test]
    fn step_rewards_then_transitions() {
        let p = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let arm = Arm::new(p.clone(), p, vec![1.0, 2.0], vec![10.0, 20.0]).unwrap();
        let inst = BanditInstance::new(vec![arm.clone(), arm], 1, RewardModel::A).unwrap();
        let mut sim = Simulator::with_states(inst, vec![0, 1], seeded(1)).unwrap();
        assert_eq!(sim.step(&[true, false]), 12.0);
        assert_eq!(sim.states(), &[1, 0]);
        assert_eq!(sim.step(&[false, true]), 12.0);
    }

    #[test]
    fn trace_bookkeeping() {
        let mut trace = RunTrace::new(Algorithm::Qwi, 2, 3);
        trace.push(&[0, 1], &[true, false], 1.5);
        trace.push(&[1, 1], &[false, true], 2.0);
        assert_eq!(trace.horizon(), 2);
        assert_eq!(trace.state_at(2), &[1, 1]);
        assert_eq!(trace.actions_at(1), &[true, false]);
        assert_eq!(trace.cumulative, vec![1.5, 3.5]);
        assert_eq!(Algorithm::Qwi.name(), "qwi");
    }
}
