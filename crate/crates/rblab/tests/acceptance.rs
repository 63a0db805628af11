//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Seeds and tolerances are fixed here.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rblab::config::{AlgorithmName, BaselineConfig, Environment, ExperimentConfig, QwiParams, TruthMode};
use rblab::harness::{fit_scaling, run_experiment, ExperimentResult, ScalingModel};
use rblab::verify::{verify_gain, verify_monotone, verify_whittle, GainSuite, WhittleSuite};
use rblab_core::bayes::sample_dirichlet;
use rblab_core::rng::seeded;
use rblab_core::tsde::episode_count_bound;
use rblab_core::whittle::whittle_indices;
use rblab_core::{Arm, Matrix};

const WHITTLE_SEED: u64 = 1;
const WHITTLE_ARMS: usize = 100;
const WHITTLE_LIMIT: Duration = Duration::from_secs(120);

const IDENTICAL_SEED: u64 = 2;
const IDENTICAL_ARMS: usize = 50;
const IDENTICAL_TOL: f64 = 1e-8;

const SUITE_SEED: u64 = 2024;
const SUITE_N: [usize; 3] = [2, 4, 8];
const SUITE_STATES: usize = 10;
const SUITE_HORIZON: usize = 5000;
const SUITE_PATHS: usize = 50;
const SUITE_LIMIT: Duration = Duration::from_secs(15 * 60);
const SLOPE_WINDOW: (usize, usize) = (1000, 5000);
const SLOPE_LIMIT: f64 = 0.9;
const NORMALIZED_GROWTH_LIMIT: f64 = 1.3;

const FIT_SEED: u64 = 6;
const FIT_PLANTED: [f64; 3] = [200.0, 20.0, 3.0];
const FIT_NOISE: f64 = 0.01;
const FIT_TOL: f64 = 0.10;

const GAIN_SEED: u64 = 7;
const GAIN_INSTANCES: usize = 50;
const GAIN_LIMIT: Duration = Duration::from_secs(5 * 60);

const MONOTONE_SEED: u64 = 8;
const MONOTONE_MATRICES: usize = 1000;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let report = verify_whittle(WHITTLE_ARMS, WHITTLE_SEED, &WhittleSuite { num_states: 5, spread: 0.1 })
        .expect("whittle suite runs");
    let elapsed = start.elapsed();
    let worst = report.checks[0].value;
    let skipped = report.checks[1].value * WHITTLE_ARMS as f64;
    verdict(
        report.passed && elapsed < WHITTLE_LIMIT,
        format!(
            "{WHITTLE_ARMS} arms, max |adaptive greedy - bisection| = {worst:.2e} (tol 1e-6), {skipped} skipped as non-indexable (max 5), {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Verdict {
    let mut rng = seeded(IDENTICAL_SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..IDENTICAL_ARMS {
        let s = rng.random_range(2..=8usize);
        let mut p = Matrix::zeros(s, s);
        for i in 0..s {
            sample_dirichlet(&vec![1.0; s], &mut rng, p.row_mut(i));
        }
        let r0: Vec<f64> = (0..s).map(|_| 10.0 * rng.random::<f64>()).collect();
        let r1: Vec<f64> = (0..s).map(|_| 10.0 * rng.random::<f64>()).collect();
        let arm = Arm::new(p.clone(), p, r0.clone(), r1.clone()).expect("valid arm");
        let w = whittle_indices(&arm).expect("indices");
        for x in 0..s {
            worst = worst.max((w[x] - (r1[x] - r0[x])).abs());
        }
    }
    verdict(worst <= IDENTICAL_TOL, format!("{IDENTICAL_ARMS} arms, max |w(s) - (r1(s) - r0(s))| = {worst:.2e} (tol 1e-8)"))
}

fn suite_config(environment: Environment) -> ExperimentConfig {
    ExperimentConfig {
        seed: SUITE_SEED,
        environment,
        mode: TruthMode::Bayesian,
        n: SUITE_N.to_vec(),
        num_states: SUITE_STATES,
        horizon: SUITE_HORIZON,
        sample_paths: SUITE_PATHS,
        algorithms: vec![AlgorithmName::Tsde, AlgorithmName::Qwi],
        baseline: BaselineConfig::default(),
        qwi: QwiParams::default(),
        traces: 0,
        check_invariants: false,
        output: None,
    }
}

struct Suite {
    results: Vec<ExperimentResult>,
    elapsed: Duration,
}

fn run_suite() -> Suite {
    let start = Instant::now();
    let results = [Environment::A, Environment::B]
        .into_iter()
        .map(|e| run_experiment(&suite_config(e), None).expect("suite experiment runs"))
        .collect();
    Suite { results, elapsed: start.elapsed() }
}

fn criterion_3(suite: &Suite) -> Verdict {
    let (mut runs, mut bad, mut worst_ratio) = (0, Vec::new(), 0.0f64);
    for result in &suite.results {
        let env = result.config.environment.label();
        for o in &result.outcomes {
            let run = o.runs.iter().find(|r| r.algorithm == AlgorithmName::Tsde).expect("tsde run");
            runs += 1;
            let bound = episode_count_bound(o.n * SUITE_STATES, SUITE_HORIZON);
            let k = run.episodes.len();
            worst_ratio = worst_ratio.max(k as f64 / bound);
            if k as f64 > bound {
                bad.push(format!("Env {env} n={} path {}: K_T={k} > {bound:.1}", o.n, o.path));
            }
            if let Some(w) = run.episodes.windows(2).find(|w| w[1].length > w[0].length + 1) {
                bad.push(format!("Env {env} n={} path {}: T_{} = {} after {}", o.n, o.path, w[1].k, w[1].length, w[0].length));
            }
        }
    }
    verdict(
        bad.is_empty(),
        format!("{runs} RB-TSDE runs, max K_T / bound = {worst_ratio:.3}, violations: {}", if bad.is_empty() { "none".into() } else { bad.join("; ") }),
    )
}

fn criterion_4(suite: &Suite) -> Verdict {
    let mut passed = suite.elapsed < SUITE_LIMIT;
    let mut parts = Vec::new();
    for result in &suite.results {
        let env = result.config.environment.label();
        for &n in &SUITE_N {
            let c = result.curve(n, AlgorithmName::Tsde).expect("curve");
            let window = &c.mean[SLOPE_WINDOW.0..=SLOPE_WINDOW.1];
            let z = c.normalized();
            let (z_half, z_full) = (z[SUITE_HORIZON / 2], z[SUITE_HORIZON]);
            let growth_ok = z_full <= NORMALIZED_GROWTH_LIMIT * z_half;
            let (slope_ok, slope_text) = match c.log_log_slope(SLOPE_WINDOW.0, SLOPE_WINDOW.1) {
                Some(s) => (s < SLOPE_LIMIT, format!("slope {s:.3}")),
                // Regret that never turns positive grows slower than any power.
                None if window.iter().all(|&r| r <= 0.0) => (true, "regret <= 0 on window".to_string()),
                None => (false, "slope undefined (mixed-sign regret)".to_string()),
            };
            passed &= slope_ok && growth_ok;
            parts.push(format!("{env}/n={n}: {slope_text}, R/sqrt(T) {z_full:.2} vs {z_half:.2} at T/2"));
        }
    }
    verdict(passed, format!("{} ({:.0}s)", parts.join("; "), suite.elapsed.as_secs_f64()))
}

fn criterion_5(suite: &Suite) -> Verdict {
    let mut passed = true;
    let mut parts = Vec::new();
    for result in &suite.results {
        let env = result.config.environment.label();
        for &n in &SUITE_N {
            let tsde = result.curve(n, AlgorithmName::Tsde).expect("curve").final_regret();
            let qwi = result.curve(n, AlgorithmName::Qwi).expect("curve").final_regret();
            passed &= tsde < qwi;
            let ratio = if tsde > 0.0 { format!("{:.1}x", qwi / tsde) } else { "inf".into() };
            parts.push(format!("{env}/n={n}: {tsde:.0} vs {qwi:.0} ({ratio})"));
        }
    }
    verdict(passed, format!("R(5000) RB-TSDE vs QWI: {}", parts.join("; ")))
}

fn criterion_6(suite: &Suite) -> Verdict {
    let mut rng = seeded(FIT_SEED);
    let [p0, p1, p2] = FIT_PLANTED;
    let points: Vec<(f64, f64)> = (10..=80)
        .map(|n| {
            let n = n as f64;
            let noise: f64 = StandardNormal.sample(&mut rng);
            (n, (p0 + p1 * n + p2 * n.powf(1.5)) * (1.0 + FIT_NOISE * noise))
        })
        .collect();
    let fit = fit_scaling(&points).expect("planted fit");
    let got = fit.power.as_ref().expect("power model").coefficients.clone();
    let rel = got.iter().zip(FIT_PLANTED).map(|(g, p)| ((g - p) / p).abs()).fold(0.0, f64::max);
    let mut passed = rel <= FIT_TOL;
    let mut parts = vec![format!("planted {FIT_PLANTED:?} -> [{:.2}, {:.2}, {:.3}], max rel err {rel:.3}", got[0], got[1], got[2])];
    for result in &suite.results {
        let pts: Vec<(f64, f64)> = SUITE_N
            .iter()
            .map(|&n| (n as f64, result.curve(n, AlgorithmName::Tsde).expect("curve").final_regret()))
            .collect();
        match fit_scaling(&pts) {
            Ok(f) => {
                let lowest = match &f.power {
                    Some(p) if p.rmse < f.linear.rmse => ScalingModel::Power,
                    _ => ScalingModel::Linear,
                };
                passed &= f.selected() == lowest;
                let power = f.power.as_ref().map_or("n/a (needs 4 points)".to_string(), |p| format!("{:.3}", p.rmse));
                parts.push(format!(
                    "Env {} suite: linear rmse {:.3}, n^1.5 rmse {power}, selected {:?}",
                    result.config.environment.label(),
                    f.linear.rmse,
                    f.selected()
                ));
            }
            Err(e) => {
                passed = false;
                parts.push(format!("suite fit failed: {e}"));
            }
        }
    }
    verdict(passed, parts.join("; "))
}

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let report = verify_gain(GAIN_INSTANCES, GAIN_SEED, &GainSuite::default()).expect("gain suite runs");
    let elapsed = start.elapsed();
    let c = &report.checks;
    let mut detail = format!(
        "{GAIN_INSTANCES} instances, max residual {:.2e}, max (index - optimal) gain {:.2e}, max rollout z {:.2}, {:.1}s",
        c[0].value,
        c[1].value,
        c[2].value,
        elapsed.as_secs_f64()
    );
    for f in &report.failures {
        detail.push_str(&format!("; {f}"));
    }
    verdict(report.passed && elapsed < GAIN_LIMIT, detail)
}

fn criterion_8() -> Verdict {
    let report = verify_monotone(MONOTONE_MATRICES, MONOTONE_SEED).expect("monotone suite runs");
    verdict(
        report.passed,
        format!("{MONOTONE_MATRICES} matrices (S in 3, 10, 25): {} failing", report.failures.len()),
    )
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).expect("readable dir") {
            let p = entry.expect("entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).expect("readable file")));
            }
        }
    }
    out.sort();
    out
}

fn cli(args: &[&str]) -> Vec<u8> {
    let o = Command::new(env!("CARGO_BIN_EXE_rblab")).args(args).env_remove("RBLAB_OUT").output().expect("binary runs");
    assert!(o.status.success(), "rblab {args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    o.stdout
}

fn criterion_9() -> Verdict {
    let dir = tempfile::tempdir().expect("temp dir");
    let config = dir.path().join("exp.json");
    fs::write(
        &config,
        r#"{"seed": 99, "environment": "B", "mode": "fixed", "n": [2, 3], "S": 4, "horizon": 400,
            "sample_paths": 4, "algorithms": ["rb-tsde", "qwi", "whittle"],
            "baseline": {"method": "long_rollout", "horizon": 20000, "reps": 4}, "traces": 2}"#,
    )
    .expect("config written");
    let mut identical = 0;
    let mut differing = Vec::new();
    let p = |x: &Path| x.to_str().unwrap().to_string();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cli(&["run", "--config", &p(&config), "--out", &p(&a), "--jobs", "1"]);
    cli(&["run", "--config", &p(&config), "--out", &p(&b)]);
    if tree(&a) == tree(&b) {
        identical += 1;
    } else {
        differing.push("run".to_string());
    }
    for (suite, n) in [("whittle", "20"), ("gain", "3"), ("monotone", "30")] {
        let (fa, fb) = (dir.path().join(format!("{suite}a.json")), dir.path().join(format!("{suite}b.json")));
        let outa = cli(&["verify", "--suite", suite, "--instances", n, "--seed", "5", "--out", &p(&fa)]);
        let outb = cli(&["verify", "--suite", suite, "--instances", n, "--seed", "5", "--out", &p(&fb)]);
        if outa == outb && fs::read(&fa).unwrap() == fs::read(&fb).unwrap() {
            identical += 1;
        } else {
            differing.push(format!("verify {suite}"));
        }
    }
    verdict(
        differing.is_empty(),
        format!("{identical}/4 invocations byte-identical on repeat (run tree of {} files, verify reports){}", tree(&a).len(), if differing.is_empty() { String::new() } else { format!("; differing: {}", differing.join(", ")) }),
    )
}

fn main() {
    let mut failed = Vec::new();
    let mut emit = |id: usize, v: Verdict| {
        println!("criterion {id} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
        if !v.passed {
            failed.push(id);
        }
    };
    emit(1, criterion_1());
    emit(2, criterion_2());
    let suite = run_suite();
    emit(3, criterion_3(&suite));
    emit(4, criterion_4(&suite));
    emit(5, criterion_5(&suite));
    emit(6, criterion_6(&suite));
    emit(7, criterion_7());
    emit(8, criterion_8());
    emit(9, criterion_9());
    if failed.is_empty() {
        println!("acceptance: all 9 criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
