//! Arms, bandit instances and model diagnostics.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Matrix, Result, STOCHASTIC_TOL};

/// How per-step rewards aggregate across arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RewardModel {
    /// Every arm yields a reward, active or not.
    A,
    /// Only activated arms yield a reward (passive rewards are zero).
    B,
}

/// One controlled two-action Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub p_passive: Matrix,
    pub p_active: Matrix,
    pub r_passive: Vec<f64>,
    pub r_active: Vec<f64>,
}

impl Arm {
    /// Builds an arm and checks its matrices and reward vectors.
    pub fn new(p_passive: Matrix, p_active: Matrix, r_passive: Vec<f64>, r_active: Vec<f64>) -> Result<Self> {
        let arm = Self { p_passive, p_active, r_passive, r_active };
        let r_max = arm.max_reward();
        let violations = arm.violations(0, r_max, None);
        if violations.is_empty() {
            Ok(arm)
        } else {
            Err(Error::InvalidModel(summarize(&violations)))
        }
    }

    pub fn num_states(&self) -> usize {
        self.p_passive.rows()
    }

    pub fn transition(&self, action: u8) -> &Matrix {
        if action == 0 {
            &self.p_passive
        } else {
            &self.p_active
        }
    }

    pub fn reward(&self, state: usize, action: u8) -> f64 {
        if action == 0 {
            self.r_passive[state]
        } else {
            self.r_active[state]
        }
    }

    pub fn max_reward(&self) -> f64 {
        self.r_passive.iter().chain(&self.r_active).fold(0.0, |a, &b| a.max(b))
    }

    fn violations(&self, arm: usize, r_max: f64, model: Option<RewardModel>) -> Vec<Violation> {
        let mut out = Vec::new();
        let s = self.p_passive.rows();
        let push = |out: &mut Vec<Violation>, kind| out.push(Violation { arm: Some(arm), kind });
        if s == 0 {
            push(&mut out, ViolationKind::Shape(String::from("arm has no states")));
            return out;
        }
        for (action, p) in [(0u8, &self.p_passive), (1, &self.p_active)] {
            if p.rows() != s || p.cols() != s {
                let msg = format!("action {action} matrix is {}x{}, expected {s}x{s}", p.rows(), p.cols());
                push(&mut out, ViolationKind::Shape(msg));
                continue;
            }
            for (row, values) in p.iter_rows().enumerate() {
                for (col, &v) in values.iter().enumerate() {
                    if !v.is_finite() || v < 0.0 {
                        push(&mut out, ViolationKind::BadProbability { action, row, col, value: v });
                    }
                }
                let sum: f64 = values.iter().sum();
                if !(libm::fabs(sum - 1.0) <= STOCHASTIC_TOL) {
                    push(&mut out, ViolationKind::RowSum { action, row, sum, deficit: 1.0 - sum });
                }
            }
        }
        for (action, r) in [(0u8, &self.r_passive), (1, &self.r_active)] {
            if r.len() != s {
                let msg = format!("action {action} reward vector has length {}, expected {s}", r.len());
                push(&mut out, ViolationKind::Shape(msg));
                continue;
            }
            for (state, &value) in r.iter().enumerate() {
                if !(0.0..=r_max).contains(&value) {
                    push(&mut out, ViolationKind::RewardOutOfRange { action, state, value, r_max });
                }
            }
        }
        if model == Some(RewardModel::B) && self.r_passive.len() == s {
            for (state, &value) in self.r_passive.iter().enumerate() {
                if value != 0.0 {
                    push(&mut out, ViolationKind::PassiveRewardInModelB { state, value });
                }
            }
        }
        out
    }
}

/// `n` arms, an activation budget `m`, and a reward model.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance {
    pub arms: Vec<Arm>,
    pub budget: usize,
    pub reward_model: RewardModel,
    /// Upper bound on per-arm rewards; defaults to the largest reward entry.
    pub r_max: f64,
}

impl BanditInstance {
    pub fn new(arms: Vec<Arm>, budget: usize, reward_model: RewardModel) -> Result<Self> {
        let r_max = arms.iter().map(Arm::max_reward).fold(0.0, f64::max);
        let inst = Self { arms, budget, reward_model, r_max };
        let violations = inst.validate();
        if violations.is_empty() {
            Ok(inst)
        } else {
            Err(Error::InvalidModel(summarize(&violations)))
        }
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    /// Sum of the arms' state-space sizes.
    pub fn total_states(&self) -> usize {
        self.arms.iter().map(Arm::num_states).sum()
    }

    pub fn state_sizes(&self) -> Vec<usize> {
        self.arms.iter().map(Arm::num_states).collect()
    }

    /// Aggregate reward of a joint state-action pair.
    pub fn joint_reward(&self, states: &[usize], active: &[bool]) -> f64 {
        self.arms
            .iter()
            .zip(states.iter().zip(active))
            .map(|(arm, (&s, &a))| match (self.reward_model, a) {
                (RewardModel::B, false) => 0.0,
                _ => arm.reward(s, a as u8),
            })
            .sum()
    }

    /// All invariant violations; empty iff the instance is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.arms.len();
        if n == 0 {
            out.push(Violation { arm: None, kind: ViolationKind::Shape(String::from("instance has no arms")) });
        }
        if self.budget == 0 || self.budget > n {
            out.push(Violation { arm: None, kind: ViolationKind::Budget { budget: self.budget, arms: n } });
        }
        for (i, arm) in self.arms.iter().enumerate() {
            out.extend(arm.violations(i, self.r_max, Some(self.reward_model)));
        }
        out
    }
}

/// Per-arm current states.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JointState(pub Vec<usize>);

impl JointState {
    pub fn new(states: Vec<usize>, instance: &BanditInstance) -> Result<Self> {
        if states.len() != instance.num_arms() {
            return Err(Error::InvalidArgument(format!(
                "joint state has {} entries for {} arms",
                states.len(),
                instance.num_arms()
            )));
        }
        for (s, arm) in states.iter().zip(&instance.arms) {
            if *s >= arm.num_states() {
                return Err(Error::OutOfRange { what: "state", index: *s, limit: arm.num_states() });
            }
        }
        Ok(Self(states))
    }
}

impl core::ops::Deref for JointState {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Offending arm, or `None` for instance-level defects.
    pub arm: Option<usize>,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    Shape(String),
    Budget { budget: usize, arms: usize },
    BadProbability { action: u8, row: usize, col: usize, value: f64 },
    RowSum { action: u8, row: usize, sum: f64, deficit: f64 },
    RewardOutOfRange { action: u8, state: usize, value: f64, r_max: f64 },
    PassiveRewardInModelB { state: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(arm) = self.arm {
            write!(f, "arm {arm}: ")?;
        }
        match &self.kind {
            ViolationKind::Shape(msg) => f.write_str(msg),
            ViolationKind::Budget { budget, arms } => {
                write!(f, "budget {budget} outside [1, {arms}]")
            }
            ViolationKind::BadProbability { action, row, col, value } => {
                write!(f, "action {action} row {row} col {col}: invalid probability {value}")
            }
            ViolationKind::RowSum { action, row, sum, deficit } => {
                write!(f, "action {action} row {row}: sums to {sum} (deficit {deficit:e})")
            }
            ViolationKind::RewardOutOfRange { action, state, value, r_max } => {
                write!(f, "action {action} state {state}: reward {value} outside [0, {r_max}]")
            }
            ViolationKind::PassiveRewardInModelB { state, value } => {
                write!(f, "state {state}: passive reward {value} must be 0 under reward model B")
            }
        }
    }
}

fn summarize(violations: &[Violation]) -> String {
    let mut s = String::new();
    for (k, v) in violations.iter().enumerate() {
        if k > 0 {
            s.push_str("; ");
        }
        s.push_str(&format!("{v}"));
    }
    s
}

/// Checks that `p` is square, nonnegative, and row-stochastic.
pub fn check_stochastic(p: &Matrix) -> Result<()> {
    if !p.is_square() || p.rows() == 0 {
        return Err(Error::NotStochastic(format!("matrix is {}x{}", p.rows(), p.cols())));
    }
    for (row, values) in p.iter_rows().enumerate() {
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::NotStochastic(format!("row {row} has entry {v}")));
        }
        let sum: f64 = values.iter().sum();
        if !(libm::fabs(sum - 1.0) <= STOCHASTIC_TOL) {
            return Err(Error::NotStochastic(format!("row {row} sums to {sum}")));
        }
    }
    Ok(())
}

fn overlap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.min(*y)).sum()
}

/// `1 − min_{s,s'} Σ_z min(P(z|s), P(z|s'))`.
pub fn ergodicity_coefficient(p: &Matrix) -> Result<f64> {
    check_stochastic(p)?;
    let n = p.rows();
    let mut min_overlap = 1.0f64;
    for s in 0..n {
        for t in s + 1..n {
            min_overlap = min_overlap.min(overlap(p.row(s), p.row(t)));
        }
    }
    Ok((1.0 - min_overlap).clamp(0.0, 1.0))
}

/// Contraction factor of one arm: the ergodicity coefficient taken over all
/// pairs of state-action rows, across both actions.
pub fn arm_contraction_factor(arm: &Arm) -> Result<f64> {
    check_stochastic(&arm.p_passive)?;
    check_stochastic(&arm.p_active)?;
    let rows: Vec<&[f64]> = arm.p_passive.iter_rows().chain(arm.p_active.iter_rows()).collect();
    let mut min_overlap = 1.0f64;
    for (k, a) in rows.iter().enumerate() {
        for b in &rows[k + 1..] {
            min_overlap = min_overlap.min(overlap(a, b));
        }
    }
    Ok((1.0 - min_overlap).clamp(0.0, 1.0))
}

/// Lower bound `Π_i (1 − c_i)` on the one-step overlap of the joint chain,
/// where `c_i` is arm `i`'s contraction factor.
pub fn joint_minorization_lower_bound(instance: &BanditInstance) -> Result<f64> {
    instance
        .arms
        .iter()
        .try_fold(1.0, |acc, arm| Ok(acc * (1.0 - arm_contraction_factor(arm)?)))
}
