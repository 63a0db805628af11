//! Whittle indices and the index policy.
//!
//! [`whittle_indices`] runs the adaptive-greedy procedure: starting from the
//! all-active policy it repeatedly finds the smallest activation charge at
//! which one more state joins the passive set, comparing the policy with
//! passive set `W` against `W ∪ {y}` for every candidate `y`. For a candidate
//! the charge is read off the ratio of reward differences to activity
//! differences of `J + h(s)`, minimized over the states `s` where activity
//! actually changes.
//!
//! [`whittle_bisection_oracle`] computes the same quantity from the
//! definition instead: it bisects on λ, solving the λ-charged single-arm
//! problem by relative value iteration at each probe.

use alloc::vec;
use alloc::vec::Vec;

use crate::arm::{Arm, BanditInstance};
use crate::eval::{evaluate_both_at, relative_value_iteration, ArmPolicy, RviOptions};
use crate::{Error, Result};

/// Activity differences at or below this count as "no change".
pub const ACTIVITY_TOL: f64 = 1e-9;
/// Candidates within this of the minimal charge are indexed together.
pub const TIE_TOL: f64 = 1e-9;
/// Bisection steps of the oracle.
pub const BISECTION_STEPS: usize = 60;

/// Per-arm, per-state index values.
#[derive(Debug, Clone, PartialEq)]
pub struct WhittleTable {
    indices: Vec<Vec<f64>>,
}

impl WhittleTable {
    pub fn new(indices: Vec<Vec<f64>>) -> Self {
        Self { indices }
    }

    /// Indices of every arm of `instance`.
    pub fn compute(instance: &BanditInstance) -> Result<Self> {
        instance.arms.iter().map(whittle_indices).collect::<Result<Vec<_>>>().map(Self::new)
    }

    pub fn index(&self, arm: usize, state: usize) -> f64 {
        self.indices[arm][state]
    }

    pub fn arm(&self, arm: usize) -> &[f64] {
        &self.indices[arm]
    }

    pub fn num_arms(&self) -> usize {
        self.indices.len()
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.indices
    }
}

/// The policy that is passive exactly on a set of states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PassiveSetPolicy {
    pub passive: Vec<bool>,
}

impl PassiveSetPolicy {
    pub fn empty(num_states: usize) -> Self {
        Self { passive: vec![false; num_states] }
    }

    pub fn states(&self) -> Vec<usize> {
        self.passive.iter().enumerate().filter_map(|(s, &p)| p.then_some(s)).collect()
    }

    pub fn policy(&self) -> ArmPolicy {
        ArmPolicy::with_passive_set(&self.passive)
    }
}

/// Output of the adaptive-greedy procedure with its intermediate charges.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexTrace {
    pub indices: Vec<f64>,
    /// ξ* of each iteration, in order.
    pub thresholds: Vec<f64>,
    /// States indexed in each iteration.
    pub batches: Vec<Vec<usize>>,
}

impl IndexTrace {
    pub fn thresholds_nondecreasing(&self) -> bool {
        self.thresholds.windows(2).all(|w| w[1] >= w[0] - TIE_TOL)
    }
}

pub fn whittle_indices(arm: &Arm) -> Result<Vec<f64>> {
    whittle_indices_traced(arm, 0).map(|t| t.indices)
}

/// Adaptive-greedy index computation with biases anchored at `reference`.
pub fn whittle_indices_traced(arm: &Arm, reference: usize) -> Result<IndexTrace> {
    let n = arm.num_states();
    let evaluate = |set: &PassiveSetPolicy| -> Result<(Vec<f64>, Vec<f64>)> {
        evaluate_both_at(arm, &set.policy(), reference)
            .map(|(d, a)| (d.relative_values(), a.relative_values()))
            .map_err(|e| Error::PassiveSet { passive: set.states(), source: alloc::boxed::Box::new(e) })
    };

    let mut set = PassiveSetPolicy::empty(n);
    let mut indices = vec![f64::NAN; n];
    let mut trace = IndexTrace { indices: Vec::new(), thresholds: Vec::new(), batches: Vec::new() };
    let mut assigned = 0;
    let mut candidates = Vec::with_capacity(n);
    while assigned < n {
        let (base_reward, base_activity) = evaluate(&set)?;
        candidates.clear();
        for y in 0..n {
            if set.passive[y] {
                continue;
            }
            set.passive[y] = true;
            let grown = evaluate(&set);
            set.passive[y] = false;
            let (reward, activity) = grown?;
            // Both differences are multiples of one Poisson solution driven
            // at `y`, so every state of Λ_y yields the same ratio; the
            // largest activity difference is the best-conditioned copy.
            let charge = (0..n)
                .map(|s| (s, base_activity[s] - activity[s]))
                .filter(|&(_, da)| libm::fabs(da) > ACTIVITY_TOL)
                .max_by(|a, b| libm::fabs(a.1).total_cmp(&libm::fabs(b.1)))
                .map(|(s, da)| (base_reward[s] - reward[s]) / da);
            if let Some(c) = charge {
                candidates.push((y, c));
            }
        }
        let Some(xi) = candidates.iter().map(|c| c.1).reduce(f64::min) else {
            return Err(Error::NoActivityChange { passive: set.states() });
        };
        let batch: Vec<usize> = candidates.iter().filter(|c| c.1 <= xi + TIE_TOL).map(|c| c.0).collect();
        for &y in &batch {
            indices[y] = xi;
            set.passive[y] = true;
        }
        assigned += batch.len();
        trace.thresholds.push(xi);
        trace.batches.push(batch);
    }
    trace.indices = indices;
    Ok(trace)
}

/// Solution of the λ-charged single-arm problem `max avg[r(s,a) − λa]`.
#[derive(Debug, Clone)]
pub struct ChargedSolution {
    pub gain: f64,
    pub q_passive: Vec<f64>,
    pub q_active: Vec<f64>,
}

impl ChargedSolution {
    /// Optimal passive set, with ties counted as passive.
    pub fn passive_set(&self) -> Vec<bool> {
        self.q_passive.iter().zip(&self.q_active).map(|(p, a)| a <= p).collect()
    }
}

/// Solves the λ-charged problem by relative value iteration, warm-started
/// from (and updating) `bias`.
pub fn solve_charged(arm: &Arm, lambda: f64, bias: &mut Vec<f64>) -> Result<ChargedSolution> {
    let n = arm.num_states();
    let q = |s: usize, a: usize, h: &[f64]| {
        let a = a as u8;
        arm.reward(s, a) - lambda * f64::from(a) + arm.transition(a).row_dot(s, h)
    };
    let gain = relative_value_iteration(n, 2, |s, a, h| Some(q(s, a, h)), bias, RviOptions::default())?;
    Ok(ChargedSolution {
        gain,
        q_passive: (0..n).map(|s| q(s, 0, bias)).collect(),
        q_active: (0..n).map(|s| q(s, 1, bias)).collect(),
    })
}

/// Default bisection bracket `[−R_max − 1, 2R_max + 1]` for an arm.
pub fn default_bracket(arm: &Arm) -> (f64, f64) {
    let r_max = arm.max_reward();
    (-r_max - 1.0, 2.0 * r_max + 1.0)
}

/// Smallest charge at which `state` is passive, by bisection over
/// `[lo, hi]`.
pub fn whittle_bisection_oracle(arm: &Arm, state: usize, lo: f64, hi: f64) -> Result<f64> {
    if state >= arm.num_states() {
        return Err(Error::OutOfRange { what: "state", index: state, limit: arm.num_states() });
    }
    if lo == hi {
        return Ok(lo);
    }
    let mut bias = Vec::new();
    let mut passive_at = |lambda: f64| -> Result<bool> {
        solve_charged(arm, lambda, &mut bias).map(|sol| sol.q_active[state] <= sol.q_passive[state])
    };
    if !passive_at(hi)? || passive_at(lo)? {
        return Err(Error::Bracket { state, lo, hi });
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if passive_at(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// First place where the passive set shrinks along the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexabilityViolation {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub state: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexabilityReport {
    pub indexable: bool,
    pub violation: Option<IndexabilityViolation>,
}

/// `points` evenly spaced charges covering `[−R_max, 2R_max]`.
pub fn default_grid(arm: &Arm, points: usize) -> Vec<f64> {
    let r_max = arm.max_reward();
    let (lo, hi) = (-r_max, 2.0 * r_max);
    let steps = points.max(2) - 1;
    (0..=steps).map(|k| lo + (hi - lo) * k as f64 / steps as f64).collect()
}

/// Checks that the optimal passive set grows with λ along `grid`.
pub fn indexability_check(arm: &Arm, grid: &[f64]) -> Result<IndexabilityReport> {
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidArgument("charge grid must be sorted".into()));
    }
    let mut bias = Vec::new();
    let mut prev: Option<(f64, Vec<bool>)> = None;
    for &lambda in grid {
        let passive = solve_charged(arm, lambda, &mut bias)?.passive_set();
        if let Some((lambda_lo, before)) = &prev {
            if let Some(state) = (0..passive.len()).find(|&s| before[s] && !passive[s]) {
                let violation = IndexabilityViolation { lambda_lo: *lambda_lo, lambda_hi: lambda, state };
                return Ok(IndexabilityReport { indexable: false, violation: Some(violation) });
            }
        }
        prev = Some((lambda, passive));
    }
    Ok(IndexabilityReport { indexable: true, violation: None })
}

/// Activates the `m` arms with the largest index at their current state;
/// ties go to the smaller arm id.
pub fn select_actions(tables: &WhittleTable, states: &[usize], m: usize) -> Vec<bool> {
    let mut scratch = SelectScratch::default();
    select_actions_into(tables, states, m, &mut scratch);
    scratch.active
}

/// Reusable buffers for [`select_actions_into`].
#[derive(Debug, Clone, Default)]
pub struct SelectScratch {
    values: Vec<f64>,
    order: Vec<usize>,
    pub active: Vec<bool>,
}

/// [`select_actions`] writing into `scratch.active` without allocating
/// once the buffers have grown.
pub fn select_actions_into(tables: &WhittleTable, states: &[usize], m: usize, scratch: &mut SelectScratch) {
    scratch.values.clear();
    scratch.values.extend(states.iter().enumerate().map(|(i, &s)| tables.index(i, s)));
    top_m_into(&scratch.values, m, &mut scratch.order, &mut scratch.active);
}

/// Marks the `m` largest entries of `values` (ties to the lower position).
pub fn top_m(values: &[f64], m: usize) -> Vec<bool> {
    let mut active = Vec::new();
    top_m_into(values, m, &mut Vec::new(), &mut active);
    active
}

fn top_m_into(values: &[f64], m: usize, order: &mut Vec<usize>, active: &mut Vec<bool>) {
    let n = values.len();
    active.clear();
    active.resize(n, false);
    if m == 1 && n > 0 {
        let mut best = 0;
        for i in 1..n {
            if values[i].total_cmp(&values[best]).is_gt() {
                best = i;
            }
        }
        active[best] = true;
        return;
    }
    order.clear();
    order.extend(0..n);
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    for &i in order.iter().take(m) {
        active[i] = true;
    }
}
