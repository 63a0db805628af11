//! Two-timescale Q-learning of Whittle indices (QWI).
//!
//! Each arm keeps, for every anchor state `ŝ`, a relative Q-table for the
//! problem charged `λ(ŝ)` per activation. On the fast timescale (step `a`)
//! the table is updated from the observed transition with reward
//! `r(s,u) − λ(ŝ)u` and the reference value `Q(s₀,0;ŝ)` subtracted. On the
//! slow timescale (step `b`) the charge of the visited state moves toward
//! indifference, `λ(s) += b (Q(s,1;s) − Q(s,0;s))`, projected onto
//! `[−R_max − 1, 2R_max + 1]`. Actions activate the `m` arms
//! with the largest current estimate `λ_i(s_i)`, with ε-greedy exploration
//! over uniformly random `m`-subsets.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::rng::StreamRng;
use crate::sim::{Algorithm, Environment, RunTrace};
use crate::tsde::KnownModel;
use crate::whittle::top_m;
use crate::{Error, Result};

/// Q-values beyond this multiple of `R_max` abort the run.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct QwiConfig {
    pub horizon: usize,
    /// Fast (Q-table) step size `a`.
    pub fast_step: f64,
    /// Slow (index) step size `b`.
    pub slow_step: f64,
    pub exploration: f64,
    /// Initial index estimates per arm; zeros when absent.
    pub initial_indices: Option<Vec<Vec<f64>>>,
}

impl QwiConfig {
    pub fn new(horizon: usize) -> Self {
        Self { horizon, fast_step: 0.3, slow_step: 0.1, exploration: 0.1, initial_indices: None }
    }
}

/// Learning state of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmLearner {
    num_states: usize,
    /// `Q(s, u; ŝ)` at `(ŝ * S + s) * 2 + u`.
    q: Vec<f64>,
    index: Vec<f64>,
}

impl ArmLearner {
    fn new(num_states: usize, index: Vec<f64>) -> Self {
        Self { num_states, q: vec![0.0; num_states * num_states * 2], index }
    }

    fn at(&self, anchor: usize, s: usize, u: usize) -> usize {
        (anchor * self.num_states + s) * 2 + u
    }

    pub fn q(&self, anchor: usize, s: usize, u: u8) -> f64 {
        self.q[self.at(anchor, s, usize::from(u))]
    }

    pub fn index_estimates(&self) -> &[f64] {
        &self.index
    }

    /// One fast-timescale update of every anchor's table; the anchor at
    /// `s` also takes a slow step, projected onto `bounds`.
    fn update(&mut self, s: usize, u: u8, next: usize, reward: f64, config: &QwiConfig, bounds: (f64, f64)) -> f64 {
        let u = usize::from(u);
        let mut largest = 0.0f64;
        for anchor in 0..self.num_states {
            let charge = self.index[anchor] * u as f64;
            let reference = self.q[self.at(anchor, 0, 0)];
            let next_best = self.q[self.at(anchor, next, 0)].max(self.q[self.at(anchor, next, 1)]);
            let k = self.at(anchor, s, u);
            let target = reward - charge + next_best - reference;
            self.q[k] += config.fast_step * (target - self.q[k]);
            largest = largest.max(libm::fabs(self.q[k]));
        }
        if config.slow_step > 0.0 {
            let gap = self.q[self.at(s, s, 1)] - self.q[self.at(s, s, 0)];
            self.index[s] = (self.index[s] + config.slow_step * gap).clamp(bounds.0, bounds.1);
        }
        largest
    }
}

pub struct QwiRun {
    pub trace: RunTrace,
    pub learners: Vec<ArmLearner>,
}

/// Uniformly random `m`-subset of `n` arms.
fn random_subset(n: usize, m: usize, rng: &mut StreamRng) -> Vec<bool> {
    let mut ids: Vec<usize> = (0..n).collect();
    let mut active = vec![false; n];
    for k in 0..m {
        let j = rng.random_range(k..n);
        ids.swap(k, j);
        active[ids[k]] = true;
    }
    active
}

pub fn run_qwi<E: Environment + ?Sized>(
    env: &mut E,
    known: &KnownModel,
    config: &QwiConfig,
    rng: &mut StreamRng,
) -> Result<QwiRun> {
    let n = env.num_arms();
    if known.r_active.len() != n {
        return Err(Error::InvalidArgument(alloc::format!("learner model does not describe {n} arms")));
    }
    for (name, step) in [("fast", config.fast_step), ("slow", config.slow_step), ("exploration", config.exploration)] {
        if !(0.0..=1.0).contains(&step) {
            return Err(Error::InvalidArgument(alloc::format!("{name} rate {step} outside [0, 1]")));
        }
    }
    let r_max = known.r_passive.iter().chain(&known.r_active).flatten().fold(0.0f64, |a, &b| a.max(b));
    let limit = DIVERGENCE_FACTOR * r_max.max(1.0);
    let bounds = (-r_max - 1.0, 2.0 * r_max + 1.0);
    if let Some(init) = &config.initial_indices {
        if init.len() != n || init.iter().zip(&known.r_active).any(|(v, r)| v.len() != r.len()) {
            return Err(Error::InvalidArgument("initial indices do not match the arms".into()));
        }
    }
    let mut learners: Vec<ArmLearner> = (0..n)
        .map(|i| {
            let s = known.r_active[i].len();
            let init = config.initial_indices.as_ref().map_or_else(|| vec![0.0; s], |v| v[i].clone());
            ArmLearner::new(s, init)
        })
        .collect();
    let mut trace = RunTrace::new(Algorithm::Qwi, n, config.horizon);
    let mut estimates = vec![0.0; n];
    for _ in 0..config.horizon {
        let states = env.states().to_vec();
        let active = if config.exploration > 0.0 && rng.random::<f64>() < config.exploration {
            random_subset(n, known.budget, rng)
        } else {
            for (e, (l, &s)) in estimates.iter_mut().zip(learners.iter().zip(&states)) {
                *e = l.index[s];
            }
            top_m(&estimates, known.budget)
        };
        let reward = env.step(&active);
        let next = env.states();
        for i in 0..n {
            let u = u8::from(active[i]);
            let r = if u == 1 { known.r_active[i][states[i]] } else { known.r_passive[i][states[i]] };
            let q = learners[i].update(states[i], u, next[i], r, config, bounds);
            if !(q <= limit) {
                return Err(Error::Diverged { arm: i, value: q });
            }
        }
        trace.push(&states, &active, reward);
    }
    Ok(QwiRun { trace, learners })
}
