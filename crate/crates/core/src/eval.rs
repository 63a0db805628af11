//! Average-reward evaluation of single-arm policies, and exact solvers for
//! the joint bandit MDP at oracle scale.
//!
//! Biases are normalized so that `bias[reference] = 0`; the default
//! reference is state 0.

use alloc::vec;
use alloc::vec::Vec;

use crate::arm::{check_stochastic, Arm, BanditInstance};
use crate::linalg;
use crate::whittle::{select_actions, WhittleTable};
use crate::{Error, Matrix, Result};

/// Joint chains larger than this are not evaluated exactly.
pub const JOINT_STATE_LIMIT: usize = 10_000;
/// Limit on `|joint states| · |feasible actions|` for the optimal-gain solver.
pub const JOINT_STATE_ACTION_LIMIT: usize = 100_000;

/// Stationary Markov policy of one arm (0 = passive, 1 = active).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArmPolicy {
    pub actions: Vec<u8>,
}

impl ArmPolicy {
    pub fn all_passive(num_states: usize) -> Self {
        Self { actions: vec![0; num_states] }
    }

    pub fn all_active(num_states: usize) -> Self {
        Self { actions: vec![1; num_states] }
    }

    /// The policy that is passive exactly on `passive`.
    pub fn with_passive_set(passive: &[bool]) -> Self {
        Self { actions: passive.iter().map(|&p| u8::from(!p)).collect() }
    }
}

/// Gain and bias of a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub gain: f64,
    pub bias: Vec<f64>,
}

impl EvalResult {
    /// `gain + bias(s)`, the combination that is insensitive to how the bias
    /// was normalized when compared across states.
    pub fn relative_values(&self) -> Vec<f64> {
        self.bias.iter().map(|b| self.gain + b).collect()
    }
}

/// Transition matrix of the chain induced by `policy`.
pub fn policy_chain(arm: &Arm, policy: &ArmPolicy) -> Matrix {
    let n = arm.num_states();
    let mut p = Matrix::zeros(n, n);
    for s in 0..n {
        p.row_mut(s).copy_from_slice(arm.transition(policy.actions[s]).row(s));
    }
    p
}

/// Factored Poisson-equation system `J + h(s) − Σ_y P(y|s) h(y) = r(s)`,
/// `h(reference) = 0`, reusable across reward vectors.
pub struct PoissonSystem {
    n: usize,
    reference: usize,
    factored: linalg::Factored,
}

impl PoissonSystem {
    pub fn new(p: &Matrix, reference: usize) -> core::result::Result<Self, f64> {
        let n = p.rows();
        // Unknown vector: slot `reference` holds J, the other slots hold h.
        let mut a = vec![0.0; n * n];
        for s in 0..n {
            for y in 0..n {
                a[s * n + y] = if y == reference {
                    1.0
                } else {
                    f64::from(u8::from(s == y)) - p[(s, y)]
                };
            }
        }
        linalg::factor(n, &a).map(|factored| Self { n, reference, factored })
    }

    pub fn solve(&self, r: &[f64]) -> EvalResult {
        let mut x = self.factored.solve(r);
        let gain = x[self.reference];
        x[self.reference] = 0.0;
        debug_assert_eq!(x.len(), self.n);
        EvalResult { gain, bias: x }
    }
}

/// Gain and bias of a Markov chain with per-state rewards `r`.
pub fn evaluate_chain(p: &Matrix, r: &[f64], reference: usize) -> Result<EvalResult> {
    if reference >= p.rows() {
        return Err(Error::OutOfRange { what: "reference state", index: reference, limit: p.rows() });
    }
    let sys = PoissonSystem::new(p, reference).map_err(|rcond| Error::Singular { policy: Vec::new(), rcond })?;
    Ok(sys.solve(r))
}

fn policy_system(arm: &Arm, policy: &ArmPolicy, reference: usize) -> Result<PoissonSystem> {
    if policy.actions.len() != arm.num_states() {
        return Err(Error::InvalidArgument(alloc::format!(
            "policy has {} actions for {} states",
            policy.actions.len(),
            arm.num_states()
        )));
    }
    if reference >= arm.num_states() {
        return Err(Error::OutOfRange { what: "reference state", index: reference, limit: arm.num_states() });
    }
    PoissonSystem::new(&policy_chain(arm, policy), reference)
        .map_err(|rcond| Error::Singular { policy: policy.actions.clone(), rcond })
}

/// Per-state rewards `r(s, π(s))`.
pub fn policy_rewards(arm: &Arm, policy: &ArmPolicy) -> Vec<f64> {
    policy.actions.iter().enumerate().map(|(s, &a)| arm.reward(s, a)).collect()
}

/// Per-state activity indicator `π(s)`.
pub fn policy_activity(policy: &ArmPolicy) -> Vec<f64> {
    policy.actions.iter().map(|&a| f64::from(a)).collect()
}

pub fn evaluate_reward(arm: &Arm, policy: &ArmPolicy) -> Result<EvalResult> {
    evaluate_reward_at(arm, policy, 0)
}

pub fn evaluate_reward_at(arm: &Arm, policy: &ArmPolicy, reference: usize) -> Result<EvalResult> {
    Ok(policy_system(arm, policy, reference)?.solve(&policy_rewards(arm, policy)))
}

/// Long-run activation frequency and its differential counterpart.
pub fn evaluate_activity(arm: &Arm, policy: &ArmPolicy) -> Result<EvalResult> {
    evaluate_activity_at(arm, policy, 0)
}

pub fn evaluate_activity_at(arm: &Arm, policy: &ArmPolicy, reference: usize) -> Result<EvalResult> {
    Ok(policy_system(arm, policy, reference)?.solve(&policy_activity(policy)))
}

/// Reward and activity evaluations from a single factorization.
pub fn evaluate_both_at(arm: &Arm, policy: &ArmPolicy, reference: usize) -> Result<(EvalResult, EvalResult)> {
    let sys = policy_system(arm, policy, reference)?;
    Ok((sys.solve(&policy_rewards(arm, policy)), sys.solve(&policy_activity(policy))))
}

/// `max_s |J + h(s) − r(s) − ⟨P_s, h⟩|`.
pub fn bellman_residual(p: &Matrix, r: &[f64], eval: &EvalResult) -> f64 {
    (0..p.rows())
        .map(|s| libm::fabs(eval.gain + eval.bias[s] - r[s] - p.row_dot(s, &eval.bias)))
        .fold(0.0, f64::max)
}

/// Unique stationary distribution of a unichain matrix.
pub fn stationary_distribution(p: &Matrix) -> Result<Vec<f64>> {
    check_stochastic(p)?;
    let n = p.rows();
    // ξ(I − P) = 0 with the last balance equation replaced by Σξ = 1.
    let mut a = vec![0.0; n * n];
    for i in 0..n - 1 {
        for j in 0..n {
            a[i * n + j] = f64::from(u8::from(i == j)) - p[(j, i)];
        }
    }
    a[(n - 1) * n..].fill(1.0);
    let lu = linalg::factor(n, &a).map_err(|rcond| Error::Reducible { rcond })?;
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let mut xi = lu.solve(&b);
    for x in &mut xi {
        // Roundoff can leave tiny negatives on transient states.
        if *x < 0.0 && *x > -1e-12 {
            *x = 0.0;
        }
    }
    if xi.iter().any(|&x| x < 0.0) {
        return Err(Error::Reducible { rcond: 0.0 });
    }
    let total: f64 = xi.iter().sum();
    xi.iter_mut().for_each(|x| *x /= total);
    Ok(xi)
}

/// Tuning of relative value iteration.
#[derive(Debug, Clone, Copy)]
pub struct RviOptions {
    /// Stop once the span of successive value differences is below this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Self-loop weight τ of the aperiodicity transform `τI + (1 − τ)P`.
    pub aperiodicity: f64,
}

impl Default for RviOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_sweeps: 1_000_000, aperiodicity: 0.5 }
    }
}

/// Relative value iteration on a finite MDP.
///
/// `backup(s, a, h)` must return `r(s,a) + ⟨P(·|s,a), h⟩`, or `None` for
/// infeasible actions. Iterates `h ← τh + (1 − τ) max_a backup(·, a, h)`,
/// which has the same fixed points as the undamped recursion up to the gain
/// scaling but no periodicity issues. On return `h` is the bias anchored at
/// state 0, so `backup(s, a, h)` are the Q-values; the gain is returned.
pub fn relative_value_iteration<F>(
    num_states: usize,
    num_actions: usize,
    backup: F,
    h: &mut Vec<f64>,
    opts: RviOptions,
) -> Result<f64>
where
    F: Fn(usize, usize, &[f64]) -> Option<f64>,
{
    h.resize(num_states, 0.0);
    let tau = opts.aperiodicity;
    let mut next = vec![0.0; num_states];
    let mut span = f64::INFINITY;
    for _ in 0..opts.max_sweeps {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in 0..num_states {
            let best = (0..num_actions)
                .filter_map(|a| backup(s, a, h))
                .fold(f64::NEG_INFINITY, f64::max);
            let v = tau * h[s] + (1.0 - tau) * best;
            next[s] = v;
            let d = v - h[s];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        span = hi - lo;
        let anchor = next[0];
        for (hs, v) in h.iter_mut().zip(&next) {
            *hs = v - anchor;
        }
        if span < opts.tol {
            // Damped updates grow by (1 − τ) times the gain.
            return Ok(0.5 * (lo + hi) / (1.0 - tau));
        }
    }
    Err(Error::NoConvergence { sweeps: opts.max_sweeps, span })
}

/// Mixed-radix enumeration of joint states; arm 0 is the most significant digit.
#[derive(Debug, Clone)]
pub struct JointSpace {
    sizes: Vec<usize>,
    total: usize,
}

impl JointSpace {
    pub fn new(sizes: Vec<usize>) -> Self {
        let total = sizes.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s)).unwrap_or(usize::MAX);
        Self { sizes, total }
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn decode(&self, mut index: usize, out: &mut [usize]) {
        for (slot, &s) in out.iter_mut().zip(&self.sizes).rev() {
            *slot = index % s;
            index /= s;
        }
    }

    pub fn encode(&self, states: &[usize]) -> usize {
        states.iter().zip(&self.sizes).fold(0, |acc, (&x, &s)| acc * s + x)
    }

    /// `Σ_{x'} Π_i rows[i][x'_i] · h(x')`, contracting one arm at a time.
    pub fn expect(&self, rows: &[&[f64]], h: &[f64], scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        scratch.extend_from_slice(h);
        for (row, &s) in rows.iter().zip(&self.sizes).rev() {
            let outer = scratch.len() / s;
            for j in 0..outer {
                let chunk = &scratch[j * s..(j + 1) * s];
                scratch[j] = chunk.iter().zip(row.iter()).map(|(a, b)| a * b).sum();
            }
            scratch.truncate(outer);
        }
        scratch[0]
    }
}

/// All action vectors with exactly `m` of `n` arms active, lexicographically
/// ordered with arm 0 varying slowest.
pub fn feasible_actions(n: usize, m: usize) -> Vec<Vec<bool>> {
    fn rec(i: usize, n: usize, left: usize, cur: &mut Vec<bool>, out: &mut Vec<Vec<bool>>) {
        if i == n {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        if n - i > left {
            cur.push(false);
            rec(i + 1, n, left, cur, out);
            cur.pop();
        }
        if left > 0 {
            cur.push(true);
            rec(i + 1, n, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if m <= n {
        rec(0, n, m, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

/// Transition matrix and rewards of the joint chain under the index policy.
pub fn joint_index_chain(instance: &BanditInstance, tables: &WhittleTable) -> Result<(Matrix, Vec<f64>)> {
    let space = JointSpace::new(instance.state_sizes());
    if space.len() > JOINT_STATE_LIMIT {
        return Err(Error::TooLarge { what: "joint state space", size: space.len(), limit: JOINT_STATE_LIMIT });
    }
    let n = instance.num_arms();
    let total = space.len();
    let mut p = Matrix::zeros(total, total);
    let mut r = vec![0.0; total];
    let mut states = vec![0; n];
    let mut next = vec![0; n];
    for x in 0..total {
        space.decode(x, &mut states);
        let active = select_actions(tables, &states, instance.budget);
        r[x] = instance.joint_reward(&states, &active);
        let rows: Vec<&[f64]> = instance
            .arms
            .iter()
            .zip(states.iter().zip(&active))
            .map(|(arm, (&s, &a))| arm.transition(u8::from(a)).row(s))
            .collect();
        let row = p.row_mut(x);
        for (y, slot) in row.iter_mut().enumerate() {
            space.decode(y, &mut next);
            *slot = rows.iter().zip(&next).map(|(row, &z)| row[z]).product();
        }
    }
    Ok((p, r))
}

/// Exact gain of the index policy on the joint chain.
pub fn joint_policy_gain(instance: &BanditInstance, tables: &WhittleTable) -> Result<f64> {
    joint_policy_evaluation(instance, tables).map(|e| e.gain)
}

pub fn joint_policy_evaluation(instance: &BanditInstance, tables: &WhittleTable) -> Result<EvalResult> {
    let (p, r) = joint_index_chain(instance, tables)?;
    evaluate_chain(&p, &r, 0)
}

/// Optimal joint gain and a greedy optimal policy.
#[derive(Debug, Clone)]
pub struct JointOptimum {
    pub gain: f64,
    /// Feasible action vectors, indexed by `policy`.
    pub actions: Vec<Vec<bool>>,
    /// Chosen action index per joint state (see [`JointSpace`] for the order).
    pub policy: Vec<usize>,
    /// Relative values anchored at joint state 0.
    pub bias: Vec<f64>,
}

impl JointOptimum {
    pub fn action(&self, joint_state: usize) -> &[bool] {
        &self.actions[self.policy[joint_state]]
    }
}

pub fn joint_optimal_gain(instance: &BanditInstance) -> Result<JointOptimum> {
    joint_optimal_gain_with(instance, RviOptions::default())
}

pub fn joint_optimal_gain_with(instance: &BanditInstance, opts: RviOptions) -> Result<JointOptimum> {
    let space = JointSpace::new(instance.state_sizes());
    let actions = feasible_actions(instance.num_arms(), instance.budget);
    let work = space.len().saturating_mul(actions.len());
    if work > JOINT_STATE_ACTION_LIMIT {
        return Err(Error::TooLarge { what: "joint state-action space", size: work, limit: JOINT_STATE_ACTION_LIMIT });
    }
    let n = instance.num_arms();
    let total = space.len();
    // Per (state, action): reward and per-arm rows, precomputed once.
    let mut rewards = Vec::with_capacity(total * actions.len());
    let mut rows: Vec<Vec<&[f64]>> = Vec::with_capacity(total * actions.len());
    let mut states = vec![0; n];
    for x in 0..total {
        space.decode(x, &mut states);
        for a in &actions {
            rewards.push(instance.joint_reward(&states, a));
            rows.push(
                instance
                    .arms
                    .iter()
                    .zip(states.iter().zip(a))
                    .map(|(arm, (&s, &act))| arm.transition(u8::from(act)).row(s))
                    .collect(),
            );
        }
    }
    let na = actions.len();
    let scratch = core::cell::RefCell::new(Vec::with_capacity(total));
    let backup = |x: usize, a: usize, h: &[f64]| {
        let k = x * na + a;
        Some(rewards[k] + space.expect(&rows[k], h, &mut scratch.borrow_mut()))
    };
    let mut h = vec![0.0; total];
    let gain = relative_value_iteration(total, na, backup, &mut h, opts)?;
    let policy = (0..total)
        .map(|x| {
            let mut best = (0, f64::NEG_INFINITY);
            for a in 0..na {
                let q = backup(x, a, &h).unwrap_or(f64::NEG_INFINITY);
                if q > best.1 {
                    best = (a, q);
                }
            }
            best.0
        })
        .collect();
    Ok(JointOptimum { gain, actions, policy, bias: h })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm::RewardModel;
    use crate::envgen::reset_matrix;

    fn arm(p0: &[&[f64]], p1: &[&[f64]], r0: &[f64], r1: &[f64]) -> Arm {
        Arm::new(Matrix::from_rows(p0).unwrap(), Matrix::from_rows(p1).unwrap(), r0.to_vec(), r1.to_vec()).unwrap()
    }

    fn sample_arm() -> Arm {
        arm(
            &[&[0.7, 0.2, 0.1], &[0.1, 0.6, 0.3], &[0.0, 0.3, 0.7]],
            &[&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.9, 0.1, 0.0]],
            &[3.0, 2.0, 0.5],
            &[1.0, 1.5, 2.5],
        )
    }

    #[test]
    fn single_state_gain_is_reward() {
        let a = arm(&[&[1.0]], &[&[1.0]], &[2.5], &[4.0]);
        let e = evaluate_reward(&a, &ArmPolicy::all_passive(1)).unwrap();
        assert_eq!(e.gain, 2.5);
        assert_eq!(e.bias, vec![0.0]);
    }

    #[test]
    fn constant_reward_has_flat_bias() {
        let a = arm(
            &[&[0.7, 0.2, 0.1], &[0.1, 0.6, 0.3], &[0.0, 0.3, 0.7]],
            &[&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.9, 0.1, 0.0]],
            &[1.5; 3],
            &[1.5; 3],
        );
        for actions in [[0, 0, 0], [1, 0, 1], [1, 1, 1], [0, 1, 0]] {
            let e = evaluate_reward(&a, &ArmPolicy { actions: actions.to_vec() }).unwrap();
            assert!((e.gain - 1.5).abs() < 1e-12);
            assert!(e.bias.iter().all(|b| b.abs() < 1e-12));
        }
    }

    #[test]
    fn activity_of_constant_policies() {
        let a = sample_arm();
        let passive = evaluate_activity(&a, &ArmPolicy::all_passive(3)).unwrap();
        assert_eq!(passive.gain, 0.0);
        assert!(passive.bias.iter().all(|&b| b == 0.0));
        let active = evaluate_activity(&a, &ArmPolicy::all_active(3)).unwrap();
        assert!((active.gain - 1.0).abs() < 1e-12);
        assert!(active.bias.iter().all(|b| b.abs() < 1e-12));
    }

    #[test]
    fn residual_and_reference_normalization() {
        let a = sample_arm();
        let policy = ArmPolicy { actions: vec![0, 1, 1] };
        let p = policy_chain(&a, &policy);
        let r = policy_rewards(&a, &policy);
        for reference in 0..3 {
            let e = evaluate_reward_at(&a, &policy, reference).unwrap();
            assert_eq!(e.bias[reference], 0.0);
            assert!(bellman_residual(&p, &r, &e) <= 1e-9);
        }
        let e0 = evaluate_reward_at(&a, &policy, 0).unwrap();
        let e2 = evaluate_reward_at(&a, &policy, 2).unwrap();
        assert!((e0.gain - e2.gain).abs() < 1e-12);
        for s in 0..3 {
            assert!(((e0.bias[s] - e0.bias[2]) - e2.bias[s]).abs() < 1e-12);
        }
    }

    #[test]
    fn multichain_policy_is_singular() {
        let a = arm(&[&[1.0, 0.0], &[0.0, 1.0]], &[&[0.5, 0.5], &[0.5, 0.5]], &[0.0, 1.0], &[0.0, 0.0]);
        match evaluate_reward(&a, &ArmPolicy::all_passive(2)) {
            Err(Error::Singular { policy, .. }) => assert_eq!(policy, vec![0, 0]),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn stationary_examples() {
        let row = [0.2, 0.5, 0.3];
        let xi = stationary_distribution(&Matrix::repeat_row(&row)).unwrap();
        for (a, b) in xi.iter().zip(row) {
            assert!((a - b).abs() < 1e-14);
        }
        let cycle = Matrix::from_rows(&[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap();
        let xi = stationary_distribution(&cycle).unwrap();
        assert!(xi.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-14));
        assert!(matches!(stationary_distribution(&Matrix::identity(2)), Err(Error::Reducible { .. })));
    }

    #[test]
    fn joint_space_round_trip() {
        let space = JointSpace::new(vec![2, 3, 4]);
        assert_eq!(space.len(), 24);
        let mut buf = [0; 3];
        for x in 0..24 {
            space.decode(x, &mut buf);
            assert_eq!(space.encode(&buf), x);
        }
        space.decode(23, &mut buf);
        assert_eq!(buf, [1, 2, 3]);
    }

    #[test]
    fn feasible_action_counts() {
        assert_eq!(feasible_actions(4, 2).len(), 6);
        assert_eq!(feasible_actions(3, 3), vec![vec![true; 3]]);
        assert!(feasible_actions(5, 2).iter().all(|a| a.iter().filter(|&&x| x).count() == 2));
    }

    #[test]
    fn forced_single_arm_gain() {
        let mut a = sample_arm();
        a.r_passive = vec![0.0; 3];
        let inst = BanditInstance::new(vec![a.clone()], 1, RewardModel::B).unwrap();
        let tables = WhittleTable::compute(&inst).unwrap();
        let expected = evaluate_reward(&a, &ArmPolicy::all_active(3)).unwrap().gain;
        assert!((joint_policy_gain(&inst, &tables).unwrap() - expected).abs() < 1e-12);
        assert!((joint_optimal_gain(&inst).unwrap().gain - expected).abs() < 1e-9);
    }

    #[test]
    fn dominant_arm_is_always_activated() {
        let p = Matrix::from_rows(&[[0.6, 0.4], [0.3, 0.7]]).unwrap();
        let strong = Arm::new(p.clone(), p.clone(), vec![0.0, 0.0], vec![2.0, 3.0]).unwrap();
        let weak = Arm::new(p.clone(), p, vec![0.0, 0.0], vec![1.0, 1.5]).unwrap();
        let inst = BanditInstance::new(vec![weak, strong], 1, RewardModel::B).unwrap();
        let opt = joint_optimal_gain(&inst).unwrap();
        for x in 0..4 {
            assert_eq!(opt.action(x), &[false, true]);
        }
    }

    #[test]
    fn guardrails() {
        let arm = Arm::new(reset_matrix(10), reset_matrix(10), vec![0.0; 10], vec![1.0; 10]).unwrap();
        let inst = BanditInstance::new(vec![arm; 5], 1, RewardModel::A).unwrap();
        let tables = WhittleTable::new(vec![vec![0.0; 10]; 5]);
        assert!(matches!(joint_policy_gain(&inst, &tables), Err(Error::TooLarge { .. })));
        assert!(matches!(joint_optimal_gain(&inst), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn rvi_reports_non_convergence() {
        let a = sample_arm();
        let opts = RviOptions { tol: 1e-10, max_sweeps: 3, aperiodicity: 0.5 };
        let mut h = Vec::new();
        let r = relative_value_iteration(3, 2, |s, u, h| Some(a.reward(s, u as u8) + a.transition(u as u8).row_dot(s, h)), &mut h, opts);
        assert!(matches!(r, Err(Error::NoConvergence { sweeps: 3, .. })));
    }
}
