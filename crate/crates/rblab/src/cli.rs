//! The `rblab` command line.
//!
//! Exit codes: 0 success, 1 runtime error or failed verification,
//! 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rblab_core::envgen::{make_environment, EnvKind};
use rblab_core::rng::{stream, TRUTH};
use rblab_core::whittle::{default_grid, indexability_check, whittle_indices};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::harness::{emit_results, fit_scaling, run_experiment, summary_rows, ScalingFit, TRUTH_GRID_POINTS};
use crate::model::ModelFile;
use crate::verify::{run_suite, Suite};
use crate::SCHEMA_VERSION;

#[derive(Parser)]
#[command(name = "rblab", version, about = "Restless-bandit planning, learning and regret experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    #[value(name = "A")]
    A,
    #[value(name = "B")]
    B,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Whittle,
    Gain,
    Monotone,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark environment and write it as a model file.
    GenEnv {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        n: usize,
        #[arg(long = "S")]
        states: usize,
        #[arg(long)]
        seed: u64,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Print the Whittle indices of one arm as `state,index` CSV.
    Whittle {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        arm: usize,
        /// Accepted for uniformity; index computation is deterministic.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Run a regret experiment and write its result files.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; default is the available parallelism.
        #[arg(long)]
        jobs: Option<usize>,
        /// Replaces the seed of the configuration file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; falls back to the configuration, then `rblab-out`.
        #[arg(long, env = "RBLAB_OUT")]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Cross-check fast algorithms against their oracles.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long)]
        seed: u64,
        /// Also write the JSON report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Fit p0 + p1·n and p0 + p1·n + p2·n^1.5 to a summary CSV.
    Fit {
        /// CSV with columns `n` and `regret_T`, and optionally `algorithm`.
        #[arg(long)]
        input: PathBuf,
        /// Accepted for uniformity; least squares is deterministic.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
    },
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn execute(command: Command) -> anyhow::Result<i32> {
    match command {
        Command::GenEnv { kind, n, states, seed, out, json } => gen_env(kind, n, states, seed, out.as_deref(), json),
        Command::Whittle { model, arm, json, .. } => whittle(&model, arm, json),
        Command::Run { config, jobs, seed, out, json } => run(&config, jobs, seed, out, json),
        Command::Verify { suite, instances, seed, out, json } => verify(suite, instances, seed, out.as_deref(), json),
        Command::Fit { input, json, .. } => fit(&input, json),
    }
}

#[derive(Serialize)]
struct GenEnvReport<'a> {
    schema_version: u32,
    kind: &'a str,
    n: usize,
    #[serde(rename = "S")]
    num_states: usize,
    seed: u64,
    out: Option<&'a Path>,
}

fn gen_env(kind: KindArg, n: usize, s: usize, seed: u64, out: Option<&Path>, json: bool) -> anyhow::Result<i32> {
    let (kind, label) = match kind {
        KindArg::A => (EnvKind::A, "A"),
        KindArg::B => (EnvKind::B, "B"),
    };
    let instance = make_environment(kind, n, s, &mut stream(seed, 0, TRUTH))?;
    let file = ModelFile::from_instance(&instance);
    match out {
        Some(path) => file.save(path)?,
        None if !json => print!("{}", file.to_json()),
        None => {}
    }
    if json {
        print_json(&GenEnvReport { schema_version: SCHEMA_VERSION, kind: label, n, num_states: s, seed, out })?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct WhittleReport {
    schema_version: u32,
    arm: usize,
    /// Whether the grid check confirmed indexability.
    verified: bool,
    indices: Vec<f64>,
}

fn whittle(model: &Path, arm: usize, json: bool) -> anyhow::Result<i32> {
    let instance = ModelFile::load(model)?.to_instance()?;
    let Some(a) = instance.arms.get(arm) else {
        bail!("arm {arm} out of range: the model has {} arms", instance.num_arms());
    };
    let indices = whittle_indices(a)?;
    let verified = indexability_check(a, &default_grid(a, TRUTH_GRID_POINTS))?.indexable;
    if !verified {
        eprintln!("warning: arm {arm} failed the grid indexability check; indices are unverified");
    }
    if json {
        print_json(&WhittleReport { schema_version: SCHEMA_VERSION, arm, verified, indices })?;
    } else {
        let mut out = std::io::stdout().lock();
        writeln!(out, "state,index")?;
        for (s, w) in indices.iter().enumerate() {
            writeln!(out, "{s},{w}")?;
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    schema_version: u32,
    outdir: &'a Path,
    files: Vec<&'a Path>,
    summary: Vec<crate::harness::SummaryRow>,
}

fn run(config: &Path, jobs: Option<usize>, seed: Option<u64>, out: Option<PathBuf>, json: bool) -> anyhow::Result<i32> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let outdir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("rblab-out"));
    let result = run_experiment(&cfg, jobs)?;
    let files = emit_results(&result, &outdir)?;
    let rows = summary_rows(&result);
    if json {
        print_json(&RunSummary {
            schema_version: SCHEMA_VERSION,
            outdir: &outdir,
            files: files.iter().map(PathBuf::as_path).collect(),
            summary: rows,
        })?;
    } else {
        println!("wrote {} files to {}", files.len(), outdir.display());
        for r in &rows {
            let slope = r.loglog_slope.map_or("-".to_string(), |s| format!("{s:.3}"));
            println!(
                "n={:<3} {:<8} R(T)={:>10.3} ± {:.3}  R(T)/√T={:.4}  slope={slope}",
                r.n, r.algorithm, r.regret_t, r.stderr_t, r.regret_t_over_sqrt_t
            );
        }
    }
    Ok(0)
}

fn verify(suite: SuiteArg, instances: usize, seed: u64, out: Option<&Path>, json: bool) -> anyhow::Result<i32> {
    let suite = match suite {
        SuiteArg::Whittle => Suite::Whittle,
        SuiteArg::Gain => Suite::Gain,
        SuiteArg::Monotone => Suite::Monotone,
    };
    let report = run_suite(suite, instances, seed)?;
    if let Some(path) = out {
        std::fs::write(path, report.to_json()).with_context(|| format!("writing {}", path.display()))?;
    }
    if json {
        print!("{}", report.to_json());
    } else {
        print!("{}", report.to_text());
    }
    Ok(if report.passed { 0 } else { 1 })
}

#[derive(Serialize)]
struct FitOutput {
    schema_version: u32,
    fits: Vec<AlgorithmFit>,
}

#[derive(Serialize)]
struct AlgorithmFit {
    algorithm: String,
    points: Vec<(f64, f64)>,
    fit: ScalingFit,
    selected: crate::harness::ScalingModel,
}

fn read_points(input: &Path) -> anyhow::Result<BTreeMap<String, Vec<(f64, f64)>>> {
    let mut reader = csv::Reader::from_path(input).with_context(|| format!("reading {}", input.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(n_col), Some(r_col)) = (col("n"), col("regret_T")) else {
        bail!("{} needs columns `n` and `regret_T`", input.display());
    };
    let alg_col = col("algorithm");
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |c: usize| -> anyhow::Result<f64> {
            record[c].parse().with_context(|| format!("row {}: `{}` is not a number", line + 1, &record[c]))
        };
        let alg = alg_col.map_or_else(|| "all".to_string(), |c| record[c].to_string());
        groups.entry(alg).or_default().push((parse(n_col)?, parse(r_col)?));
    }
    if groups.is_empty() {
        bail!("{} has no data rows", input.display());
    }
    Ok(groups)
}

fn fit(input: &Path, json: bool) -> anyhow::Result<i32> {
    let mut fits = Vec::new();
    for (algorithm, points) in read_points(input)? {
        let fit = fit_scaling(&points).with_context(|| format!("fitting {algorithm}"))?;
        let selected = fit.selected();
        fits.push(AlgorithmFit { algorithm, points, fit, selected });
    }
    if json {
        print_json(&FitOutput { schema_version: SCHEMA_VERSION, fits })?;
        return Ok(0);
    }
    for f in &fits {
        let l = &f.fit.linear;
        println!(
            "{}: linear p0={:.6} p1={:.6} rmse={:.6}",
            f.algorithm, l.coefficients[0], l.coefficients[1], l.rmse
        );
        match &f.fit.power {
            Some(p) => println!(
                "{}: n^1.5  p0={:.6} p1={:.6} p2={:.6} rmse={:.6}",
                f.algorithm, p.coefficients[0], p.coefficients[1], p.coefficients[2], p.rmse
            ),
            None => println!("{}: n^1.5 model needs at least 4 points", f.algorithm),
        }
        println!("{}: selected {:?}", f.algorithm, f.selected);
    }
    Ok(0)
}
