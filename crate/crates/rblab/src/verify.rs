//! Oracle cross-check suites behind `rblab verify`.
//!
//! Instance `i` of a suite draws from `stream(seed, i, TRUTH)`, and its
//! simulations from `stream(seed, i, BASELINE)`, so every instance replays
//! on its own. Reports list one check per tolerance plus a line for every
//! failing instance.

use rayon::prelude::*;
use rblab_core::envgen::{default_spread, random_monotone_matrix, reset_matrix, with_passive_dynamics, EnvKind};
use rblab_core::eval::{
    bellman_residual, evaluate_chain, evaluate_reward, joint_index_chain, joint_optimal_gain, policy_chain,
    policy_rewards, ArmPolicy,
};
use rblab_core::rng::{stream, BASELINE, TRUTH};
use rblab_core::sim::rollout_gain;
use rblab_core::whittle::{default_bracket, default_grid, indexability_check, whittle_bisection_oracle, whittle_indices};
use rblab_core::{Arm, Matrix, WhittleTable};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::TRUTH_GRID_POINTS;
use crate::SCHEMA_VERSION;

pub const INDEX_TOL: f64 = 1e-6;
/// Largest share of arms the whittle suite may skip as non-indexable.
pub const MAX_SKIPPED_SHARE: f64 = 0.05;
pub const RESIDUAL_TOL: f64 = 1e-9;
pub const GAIN_ORDER_TOL: f64 = 1e-10;
/// Rollout estimates must lie within this many standard errors of the exact gain.
pub const ROLLOUT_Z: f64 = 3.0;
pub const MONOTONE_SIZES: [usize; 3] = [3, 10, 25];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Whittle,
    Gain,
    Monotone,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, limit: f64) -> Self {
        Self { name, value, limit, passed: value <= limit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub suite: Suite,
    pub seed: u64,
    pub instances: usize,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub failures: Vec<String>,
}

impl VerifyReport {
    fn new(suite: Suite, seed: u64, instances: usize, checks: Vec<Check>, failures: Vec<String>) -> Self {
        let passed = failures.is_empty() && checks.iter().all(|c| c.passed);
        Self { schema_version: SCHEMA_VERSION, suite, seed, instances, passed, checks, failures }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    /// One line per check and failure.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "suite {:?}, seed {}, {} instances: {}\n",
            self.suite,
            self.seed,
            self.instances,
            if self.passed { "PASS" } else { "FAIL" }
        );
        for c in &self.checks {
            let verdict = if c.passed { "ok" } else { "FAILED" };
            out.push_str(&format!("  {}: {:e} (limit {:e}) {verdict}\n", c.name, c.value, c.limit));
        }
        for f in &self.failures {
            out.push_str(&format!("  failure: {f}\n"));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct WhittleSuite {
    pub num_states: usize,
    pub spread: f64,
}

impl Default for WhittleSuite {
    fn default() -> Self {
        Self { num_states: 5, spread: 0.1 }
    }
}

#[derive(Debug, Clone)]
pub struct GainSuite {
    pub rollout_horizon: usize,
    pub rollout_reps: usize,
}

impl Default for GainSuite {
    fn default() -> Self {
        Self { rollout_horizon: 100_000, rollout_reps: 64 }
    }
}

/// Reset-on-activate arm with a monotone passive matrix and Env-A rewards.
pub fn whittle_suite_arm(seed: u64, i: usize, params: &WhittleSuite) -> Result<Arm> {
    let mut rng = stream(seed, i as u64, TRUTH);
    let s = params.num_states;
    let (r0, r1) = EnvKind::A.rewards(s);
    Ok(Arm::new(random_monotone_matrix(s, params.spread, &mut rng)?, reset_matrix(s), r0, r1)?)
}

enum IndexOutcome {
    Skipped,
    Compared(f64),
}

fn compare_indices(arm: &Arm) -> Result<IndexOutcome> {
    if !indexability_check(arm, &default_grid(arm, TRUTH_GRID_POINTS))?.indexable {
        return Ok(IndexOutcome::Skipped);
    }
    let fast = whittle_indices(arm)?;
    let (lo, hi) = default_bracket(arm);
    let mut worst: f64 = 0.0;
    for (s, w) in fast.iter().enumerate() {
        worst = worst.max((w - whittle_bisection_oracle(arm, s, lo, hi)?).abs());
    }
    Ok(IndexOutcome::Compared(worst))
}

/// Adaptive-greedy indices against λ-bisection on random benchmark arms.
pub fn verify_whittle(instances: usize, seed: u64, params: &WhittleSuite) -> Result<VerifyReport> {
    let outcomes: Vec<Result<IndexOutcome>> =
        (0..instances).into_par_iter().map(|i| compare_indices(&whittle_suite_arm(seed, i, params)?)).collect();
    let (mut skipped, mut worst) = (0usize, 0.0f64);
    let mut failures = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(IndexOutcome::Skipped) => skipped += 1,
            Ok(IndexOutcome::Compared(d)) => {
                worst = worst.max(d);
                if !(d <= INDEX_TOL) {
                    failures.push(format!("arm {i}: index mismatch {d:e}"));
                }
            }
            Err(e) => failures.push(format!("arm {i}: {e}")),
        }
    }
    let share = if instances == 0 { 0.0 } else { skipped as f64 / instances as f64 };
    let checks = vec![
        Check::at_most("max |adaptive-greedy - bisection|", worst, INDEX_TOL),
        Check::at_most("share of arms skipped as non-indexable", share, MAX_SKIPPED_SHARE),
    ];
    Ok(VerifyReport::new(Suite::Whittle, seed, instances, checks, failures))
}

struct GainOutcome {
    residual: f64,
    excess: f64,
    z: f64,
}

/// Two arms with 2 or 3 states, Dirichlet passive rows, reset activation
/// and the rewards of Env A or B, budget 1.
pub fn gain_suite_instance(seed: u64, i: usize) -> Result<rblab_core::BanditInstance> {
    let mut rng = stream(seed, i as u64, TRUTH);
    let s = rng.random_range(2..=3usize);
    let kind = if rng.random::<bool>() { EnvKind::A } else { EnvKind::B };
    let passive = (0..2)
        .map(|_| {
            let mut p = Matrix::zeros(s, s);
            for row in 0..s {
                rblab_core::bayes::sample_dirichlet(&vec![1.0; s], &mut rng, p.row_mut(row));
            }
            p
        })
        .collect();
    Ok(with_passive_dynamics(kind, passive)?)
}

fn arm_residuals(arm: &Arm) -> Result<f64> {
    let s = arm.num_states();
    let mut worst: f64 = 0.0;
    for mask in 0..1u32 << s {
        let passive: Vec<bool> = (0..s).map(|x| mask >> x & 1 == 1).collect();
        let policy = ArmPolicy::with_passive_set(&passive);
        let eval = evaluate_reward(arm, &policy)?;
        worst = worst.max(bellman_residual(&policy_chain(arm, &policy), &policy_rewards(arm, &policy), &eval));
    }
    Ok(worst)
}

fn check_gain(seed: u64, i: usize, params: &GainSuite) -> Result<GainOutcome> {
    let inst = gain_suite_instance(seed, i)?;
    let tables = WhittleTable::compute(&inst)?;
    let mut residual: f64 = 0.0;
    for arm in &inst.arms {
        residual = residual.max(arm_residuals(arm)?);
    }
    let (p, r) = joint_index_chain(&inst, &tables)?;
    let eval = evaluate_chain(&p, &r, 0)?;
    residual = residual.max(bellman_residual(&p, &r, &eval));
    let optimum = joint_optimal_gain(&inst)?.gain;
    let rollout = rollout_gain(
        &inst,
        &tables,
        params.rollout_horizon,
        params.rollout_reps,
        &mut stream(seed, i as u64, BASELINE),
    )?;
    let gap = (rollout.mean - eval.gain).abs();
    let z = if rollout.stderr > 0.0 {
        gap / rollout.stderr
    } else if gap == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(GainOutcome { residual, excess: eval.gain - optimum, z })
}

/// Policy-evaluation residuals, index-policy gain against the optimum, and
/// rollout estimates against exact joint gains.
pub fn verify_gain(instances: usize, seed: u64, params: &GainSuite) -> Result<VerifyReport> {
    let outcomes: Vec<Result<GainOutcome>> =
        (0..instances).into_par_iter().map(|i| check_gain(seed, i, params)).collect();
    let (mut residual, mut excess, mut z) = (0.0f64, f64::NEG_INFINITY, 0.0f64);
    let mut failures = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(o) => {
                residual = residual.max(o.residual);
                excess = excess.max(o.excess);
                z = z.max(o.z);
                if !(o.z <= ROLLOUT_Z) {
                    failures.push(format!("instance {i}: rollout {:.2} standard errors from exact gain", o.z));
                }
                if !(o.excess <= GAIN_ORDER_TOL) {
                    failures.push(format!("instance {i}: index policy beats the optimum by {:e}", o.excess));
                }
            }
            Err(e) => failures.push(format!("instance {i}: {e}")),
        }
    }
    if instances == 0 {
        excess = 0.0;
    }
    let checks = vec![
        Check::at_most("max policy evaluation residual", residual, RESIDUAL_TOL),
        Check::at_most("max (index gain - optimal gain)", excess, GAIN_ORDER_TOL),
        Check::at_most("max |rollout - exact| / stderr", z, ROLLOUT_Z),
    ];
    Ok(VerifyReport::new(Suite::Gain, seed, instances, checks, failures))
}

/// Entry `x` as an integer multiple of 2⁻⁴⁸, if it is one.
fn grid_units(x: f64) -> Option<i64> {
    let scaled = x * (1u64 << 48) as f64;
    (scaled.fract() == 0.0 && (0.0..=(1u64 << 48) as f64).contains(&scaled)).then_some(scaled as i64)
}

/// Row-stochasticity and tail-sum monotonicity in exact integer arithmetic.
fn monotone_defect(p: &Matrix) -> Option<String> {
    let n = p.rows();
    let mut prev_tails: Option<Vec<i64>> = None;
    for i in 0..n {
        let units: Option<Vec<i64>> = p.row(i).iter().map(|&x| grid_units(x)).collect();
        let Some(units) = units else {
            return Some(format!("row {i} has an entry off the 2^-48 grid"));
        };
        if units.iter().sum::<i64>() != 1 << 48 {
            return Some(format!("row {i} does not sum to 1"));
        }
        if p.row(i).iter().sum::<f64>() != 1.0 {
            return Some(format!("row {i} does not sum to 1 in floating point"));
        }
        let mut tails = vec![0i64; n + 1];
        for j in (0..n).rev() {
            tails[j] = tails[j + 1] + units[j];
        }
        if let Some(prev) = &prev_tails {
            if let Some(j) = (0..n).find(|&j| prev[j] > tails[j]) {
                return Some(format!("tail sum F[{},{j}] exceeds F[{i},{j}]", i - 1));
            }
        }
        prev_tails = Some(tails);
    }
    None
}

/// Generated matrices for `S` cycling through 3, 10, 25 and a spread drawn
/// uniformly from `[0, 1]`, plus the benchmark spread on every third one.
pub fn verify_monotone(instances: usize, seed: u64) -> Result<VerifyReport> {
    let mut failures = Vec::new();
    for i in 0..instances {
        let mut rng = stream(seed, i as u64, TRUTH);
        let s = MONOTONE_SIZES[i % MONOTONE_SIZES.len()];
        let d = if i % 3 == 2 { default_spread(s) } else { rng.random::<f64>() };
        let p = random_monotone_matrix(s, d, &mut rng)?;
        if let Some(defect) = monotone_defect(&p) {
            failures.push(format!("matrix {i} (S = {s}, d = {d}): {defect}"));
        }
    }
    let checks = vec![Check::at_most("failing matrices", failures.len() as f64, 0.0)];
    Ok(VerifyReport::new(Suite::Monotone, seed, instances, checks, failures))
}

pub fn run_suite(suite: Suite, instances: usize, seed: u64) -> Result<VerifyReport> {
    if instances == 0 {
        return Err(Error::Config("a verification suite needs at least one instance".into()));
    }
    match suite {
        Suite::Whittle => verify_whittle(instances, seed, &WhittleSuite::default()),
        Suite::Gain => verify_gain(instances, seed, &GainSuite::default()),
        Suite::Monotone => verify_monotone(instances, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defects_are_detected() {
        let good = Matrix::from_rows(&[[0.75, 0.25], [0.5, 0.5]]).unwrap();
        assert_eq!(monotone_defect(&good), None);
        let reversed = Matrix::from_rows(&[[0.5, 0.5], [0.75, 0.25]]).unwrap();
        assert!(monotone_defect(&reversed).unwrap().contains("tail sum"));
        let off_grid = Matrix::from_rows(&[[0.1, 0.9], [0.1, 0.9]]).unwrap();
        assert!(monotone_defect(&off_grid).unwrap().contains("grid"));
    }

    #[test]
    fn small_suites_pass() {
        assert!(verify_whittle(5, 3, &WhittleSuite::default()).unwrap().passed);
        assert!(verify_monotone(9, 3).unwrap().passed);
        let quick = GainSuite { rollout_horizon: 20_000, rollout_reps: 16 };
        let report = verify_gain(2, 3, &quick).unwrap();
        assert!(report.checks[0].passed && report.checks[1].passed, "{}", report.to_text());
    }

    #[test]
    fn reports_are_deterministic() {
        let a = verify_monotone(6, 11).unwrap().to_json();
        assert_eq!(a, verify_monotone(6, 11).unwrap().to_json());
        assert!(a.contains("\"schema_version\": 1"));
    }

    #[test]
    fn zero_instances_rejected() {
        assert!(run_suite(Suite::Monotone, 0, 1).is_err());
    }
}
