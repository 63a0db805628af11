//! Monte-Carlo regret experiments.
//!
//! Every `(n, path)` pair is one task. Its random streams derive from
//! `seed ⊕ run_index` with `run_index = n << 32 | path`, so a task replays
//! identically in isolation and all algorithms of a task see the same true
//! model, the same baseline and the same environment noise stream.
//! Aggregation sorts outcomes by `(n, path)` first, so results do not depend
//! on task completion order.

mod baseline;
mod curve;
mod emit;
mod fit;
mod svg;

pub use baseline::estimate_baseline_gain;
pub use curve::{path_regret, RegretCurve};
pub use emit::{emit_results, summary_rows, SummaryRow};
pub use fit::{fit_scaling, Fit, ScalingFit, ScalingModel, RANK_TOL};

use rayon::prelude::*;
use rblab_core::bayes::{sample_dirichlet, Posterior};
use rblab_core::envgen::{make_environment, reset_matrix, with_passive_dynamics};
use rblab_core::qwi::{run_qwi, QwiConfig};
use rblab_core::rng::{stream, StreamRng, BASELINE, ENVIRONMENT, LEARNER, TRUTH};
use rblab_core::sim::{run_index_policy, GainEstimate, RunTrace, Simulator};
use rblab_core::tsde::{run_tsde, EpisodeRecord, KnownModel, TsdeConfig};
use rblab_core::whittle::{default_grid, indexability_check};
use rblab_core::{BanditInstance, Matrix, WhittleTable};

use crate::config::{AlgorithmName, ExperimentConfig, TruthMode};
use crate::error::{Error, Result};

/// Grid size of the indexability check on every true arm.
pub const TRUTH_GRID_POINTS: usize = 100;

/// Path slot of the shared truth stream in fixed-instance mode.
const FIXED_TRUTH_PATH: u64 = u32::MAX as u64;

pub fn run_index(n: usize, path: usize) -> u64 {
    ((n as u64) << 32) | path as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRun {
    pub algorithm: AlgorithmName,
    pub rewards: Vec<f64>,
    /// Episode log; empty for algorithms without episodes.
    pub episodes: Vec<EpisodeRecord>,
    /// Kept for the first `config.traces` paths.
    pub trace: Option<RunTrace>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub n: usize,
    pub path: usize,
    pub baseline: GainEstimate,
    /// True arms whose indexability the grid check could not confirm.
    pub unverified_arms: usize,
    pub runs: Vec<PathRun>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub outcomes: Vec<PathOutcome>,
    /// One curve per `(n, algorithm)`, in configuration order.
    pub curves: Vec<RegretCurve>,
}

impl ExperimentResult {
    pub fn curve(&self, n: usize, algorithm: AlgorithmName) -> Option<&RegretCurve> {
        self.curves.iter().find(|c| c.n == n && c.algorithm == algorithm)
    }
}

fn dirichlet_passive(s: usize, rng: &mut StreamRng) -> Matrix {
    let ones = vec![1.0; s];
    let mut p = Matrix::zeros(s, s);
    for i in 0..s {
        sample_dirichlet(&ones, rng, p.row_mut(i));
    }
    p
}

/// The true model of one sample path.
pub fn sample_truth(config: &ExperimentConfig, n: usize, path: usize) -> Result<BanditInstance> {
    let kind = config.environment.kind();
    let s = config.num_states;
    Ok(match config.mode {
        TruthMode::Bayesian => {
            let mut rng = stream(config.seed, run_index(n, path), TRUTH);
            let passive = (0..n).map(|_| dirichlet_passive(s, &mut rng)).collect();
            with_passive_dynamics(kind, passive)?
        }
        TruthMode::Fixed => {
            let mut rng = stream(config.seed, ((n as u64) << 32) | FIXED_TRUTH_PATH, TRUTH);
            make_environment(kind, n, s, &mut rng)?
        }
    })
}

/// Uniform Dirichlet prior on passive rows; the reset dynamics are known.
pub fn learner_prior(instance: &BanditInstance) -> Result<Posterior> {
    let sizes = instance.state_sizes();
    let known = sizes.iter().map(|&s| reset_matrix(s)).collect();
    Ok(Posterior::uniform(&sizes).with_known_active(known)?)
}

fn run_algorithm(
    config: &ExperimentConfig,
    algorithm: AlgorithmName,
    truth: &BanditInstance,
    tables: &WhittleTable,
    ri: u64,
) -> Result<RunTrace> {
    let mut env = Simulator::new(truth.clone(), stream(config.seed, ri, ENVIRONMENT));
    let mut rng = stream(config.seed, ri, LEARNER);
    let known = KnownModel::from_instance(truth);
    Ok(match algorithm {
        AlgorithmName::Tsde => {
            let mut tsde = TsdeConfig::new(config.horizon);
            tsde.check_invariants = config.check_invariants;
            run_tsde(&mut env, &known, learner_prior(truth)?, &tsde, &mut rng)?.trace
        }
        AlgorithmName::Qwi => {
            let q = QwiConfig {
                horizon: config.horizon,
                fast_step: config.qwi.fast_step,
                slow_step: config.qwi.slow_step,
                exploration: config.qwi.exploration,
                initial_indices: None,
            };
            run_qwi(&mut env, &known, &q, &mut rng)?.trace
        }
        AlgorithmName::Oracle => run_index_policy(&mut env, tables, truth.budget, config.horizon),
    })
}

fn run_path_inner(config: &ExperimentConfig, n: usize, path: usize) -> Result<PathOutcome> {
    let ri = run_index(n, path);
    let truth = sample_truth(config, n, path)?;
    let tables = WhittleTable::compute(&truth)?;
    let unverified_arms = truth
        .arms
        .iter()
        .filter(|arm| !indexability_check(arm, &default_grid(arm, TRUTH_GRID_POINTS)).is_ok_and(|r| r.indexable))
        .count();
    let b = &config.baseline;
    let baseline =
        estimate_baseline_gain(&truth, &tables, b.method, b.horizon, b.reps, &mut stream(config.seed, ri, BASELINE))?;
    let mut runs = Vec::with_capacity(config.algorithms.len());
    for &algorithm in &config.algorithms {
        let trace = run_algorithm(config, algorithm, &truth, &tables, ri)?;
        runs.push(PathRun {
            algorithm,
            rewards: trace.rewards.clone(),
            episodes: trace.episodes.clone(),
            trace: (path < config.traces).then_some(trace),
        });
    }
    Ok(PathOutcome { n, path, baseline, unverified_arms, runs })
}

/// Runs every algorithm on sample path `path` with `n` arms.
pub fn run_path(config: &ExperimentConfig, n: usize, path: usize) -> Result<PathOutcome> {
    run_path_inner(config, n, path).map_err(|e| Error::PathFailed {
        n,
        path,
        seed: config.seed,
        run_index: run_index(n, path),
        source: Box::new(e),
    })
}

/// Runs all sample paths on a pool of `jobs` threads (default: available
/// parallelism) and aggregates them.
pub fn run_experiment(config: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentResult> {
    config.validate()?;
    let tasks: Vec<(usize, usize)> =
        config.n.iter().flat_map(|&n| (0..config.sample_paths).map(move |p| (n, p))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<PathOutcome>> =
        pool.install(|| tasks.par_iter().map(|&(n, p)| run_path(config, n, p)).collect());
    let outcomes = results.into_iter().collect::<Result<Vec<_>>>()?;
    aggregate(config, outcomes)
}

/// Builds regret curves from path outcomes given in any order.
pub fn aggregate(config: &ExperimentConfig, mut outcomes: Vec<PathOutcome>) -> Result<ExperimentResult> {
    let position = |n: usize| config.n.iter().position(|&x| x == n).unwrap_or(usize::MAX);
    outcomes.sort_by_key(|o| (position(o.n), o.path));
    let mut curves = Vec::new();
    for &n in &config.n {
        let group: Vec<&PathOutcome> = outcomes.iter().filter(|o| o.n == n).collect();
        if group.is_empty() {
            return Err(Error::Empty(format!("no sample paths for n = {n}")));
        }
        for (k, &algorithm) in config.algorithms.iter().enumerate() {
            let series: Vec<Vec<f64>> =
                group.iter().map(|o| path_regret(o.baseline.mean, &o.runs[k].rewards)).collect();
            curves.push(RegretCurve::from_paths(n, algorithm, &series));
        }
    }
    Ok(ExperimentResult { config: config.clone(), outcomes, curves })
}
